#include "energs/voxel_field.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>

namespace energs {

LabelCounts VoxelPartition::counts() const {
  LabelCounts c;
  for (Label l : labels.data()) {
    switch (l) {
      case Label::Occ: ++c.occ; break;
      case Label::Free: ++c.free; break;
      case Label::Unk: ++c.unk; break;
    }
  }
  return c;
}

GridFrame make_frame(const Aabb& bounds, double voxel_size) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) throw std::invalid_argument("voxel_size must be positive");
  if (bounds.degenerate()) throw std::invalid_argument("degenerate bounds");
  GridFrame f;
  f.origin = bounds.lo;
  f.voxel_size = voxel_size;
  const Vec3 e = bounds.extent();
  auto cells = [&](double len) {
    const double n = std::ceil(len / voxel_size - 1e-9);
    if (n > 4096.0) throw std::invalid_argument("grid too large along one axis");
    return std::max(1, static_cast<int>(n));
  };
  f.dims = {cells(e.x), cells(e.y), cells(e.z)};
  return f;
}

VoxelPartition carve(std::span<const SensorScan> scans, const Aabb& bounds, double voxel_size) {
  VoxelPartition p;
  p.frame = make_frame(bounds, voxel_size);
  const Dims dims = p.frame.dims;
  Grid3<std::uint8_t> traversed(dims, 0);
  Grid3<std::uint8_t> hit(dims, 0);

  std::size_t rays = 0;
  for (const auto& s : scans) {
    for (const auto& r : s.rays) {
      ++rays;
      const Vec3 end = s.origin + r.dir * (r.hit ? r.distance : s.max_range);
      traverse_segment(p.frame, s.origin, end, [&](const Index3& i) { traversed[i] = 1; });
      if (r.hit && p.frame.inside(r.point)) hit[p.frame.containing(r.point)] = 1;
    }
  }

  p.labels = Grid3<Label>(dims, Label::Unk);
  for (std::size_t n = 0; n < dims.count(); ++n) {
    if (hit.at_linear(n)) p.labels.at_linear(n) = Label::Occ;
    else if (traversed.at_linear(n)) p.labels.at_linear(n) = Label::Free;
  }
  p.no_evidence = rays == 0;
  return p;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (q - p)^2 + f[p] over finite f[p]; writes the
// minimum into d. Infinite entries contribute nothing.
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  int k = -1;
  auto meet = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * q - 2.0 * p);
  };
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = meet(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = meet(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = static_cast<double>(q - v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Grid3<double> edt(const Grid3<std::uint8_t>& mask, double voxel_size) {
  const Dims n = mask.dims();
  Grid3<double> sq(n, kInf);
  bool any = false;
  for (std::size_t i = 0; i < n.count(); ++i) {
    if (mask.at_linear(i)) {
      sq.at_linear(i) = 0.0;
      any = true;
    }
  }
  if (!any) return Grid3<double>(n, kDistanceSentinel);

  const int longest = std::max({n.x, n.y, n.z});
  std::vector<double> f(static_cast<std::size_t>(longest)), d(static_cast<std::size_t>(longest));
  std::vector<int> v;
  std::vector<double> z;

  for (int axis = 0; axis < 3; ++axis) {
    const int len = n[axis];
    const int a1 = axis == 0 ? 1 : 0;
    const int a2 = axis == 2 ? 1 : 2;
    for (int j = 0; j < n[a2]; ++j) {
      for (int i = 0; i < n[a1]; ++i) {
        auto idx = [&](int t) {
          int c[3];
          c[axis] = t;
          c[a1] = i;
          c[a2] = j;
          return n.linear(c[0], c[1], c[2]);
        };
        for (int t = 0; t < len; ++t) f[t] = sq.at_linear(idx(t));
        edt_1d(f.data(), d.data(), len, v, z);
        for (int t = 0; t < len; ++t) sq.at_linear(idx(t)) = d[t];
      }
    }
  }

  Grid3<double> out(n, 0.0);
  for (std::size_t i = 0; i < n.count(); ++i) out.at_linear(i) = std::sqrt(sq.at_linear(i)) * voxel_size;
  return out;
}

Grid3<std::uint8_t> label_mask(const VoxelPartition& partition, std::initializer_list<Label> targets) {
  Grid3<std::uint8_t> m(partition.labels.dims(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (Label t : targets) {
      if (partition.labels.at_linear(i) == t) m.at_linear(i) = 1;
    }
  }
  return m;
}

Grid3<double> edt(const VoxelPartition& partition, std::initializer_list<Label> targets) {
  return edt(label_mask(partition, targets), partition.frame.voxel_size);
}

Grid3<std::uint8_t> point_mask(const GridFrame& frame, std::span<const Vec3> cloud) {
  Grid3<std::uint8_t> m(frame.dims, 0);
  for (const auto& p : cloud)
    if (frame.inside(p)) m[frame.containing(p)] = 1;
  return m;
}

Grid3<Vec3> gradient(const Grid3<double>& g, double voxel_size) {
  const Dims n = g.dims();
  Grid3<Vec3> out(n, Vec3{});
  bool all_sentinel = true;
  for (double v : g.data()) {
    if (v != kDistanceSentinel) {
      all_sentinel = false;
      break;
    }
  }
  if (all_sentinel) return out;

  for (int k = 0; k < n.z; ++k) {
    for (int j = 0; j < n.y; ++j) {
      for (int i = 0; i < n.x; ++i) {
        const int c[3] = {i, j, k};
        Vec3 grad;
        for (int a = 0; a < 3; ++a) {
          if (n[a] < 2) continue;
          int lo[3] = {i, j, k};
          int hi[3] = {i, j, k};
          lo[a] = std::max(c[a] - 1, 0);
          hi[a] = std::min(c[a] + 1, n[a] - 1);
          const double span = static_cast<double>(hi[a] - lo[a]) * voxel_size;
          grad[a] = (g(hi[0], hi[1], hi[2]) - g(lo[0], lo[1], lo[2])) / span;
        }
        out(i, j, k) = grad;
      }
    }
  }
  return out;
}

namespace {

Grid3<double> round_to_float(Grid3<double> g) {
  for (auto& v : g.data()) v = static_cast<double>(static_cast<float>(v));
  return g;
}

}  // namespace

DistanceFieldSet fields_from_distances(const GridFrame& frame, Grid3<double> d_occ, Grid3<double> d_trust,
                                       Grid3<double> d_unk) {
  if (d_occ.dims() != frame.dims || d_trust.dims() != frame.dims || d_unk.dims() != frame.dims) {
    throw std::invalid_argument("distance grids do not match the frame");
  }
  DistanceFieldSet f;
  f.frame = frame;
  f.d_occ = round_to_float(std::move(d_occ));
  f.d_trust = round_to_float(std::move(d_trust));
  f.d_unk = round_to_float(std::move(d_unk));
  f.grad_occ = gradient(f.d_occ, frame.voxel_size);
  f.grad_trust = gradient(f.d_trust, frame.voxel_size);
  f.grad_unk = gradient(f.d_unk, frame.voxel_size);
  f.occ_enabled = false;
  for (double v : f.d_occ.data()) {
    if (v != kDistanceSentinel) {
      f.occ_enabled = true;
      break;
    }
  }
  return f;
}

DistanceFieldSet build_distance_fields(const VoxelPartition& partition, std::span<const Vec3> cloud) {
  const GridFrame& frame = partition.frame;
  const double vs = frame.voxel_size;

  Grid3<double> d_occ = edt(point_mask(frame, cloud), vs);

  Grid3<double> d_trust = edt(partition, {Label::Occ, Label::Unk});
  for (std::size_t i = 0; i < d_trust.size(); ++i)
    if (partition.labels.at_linear(i) != Label::Free) d_trust.at_linear(i) = 0.0;

  Grid3<double> d_unk = edt(partition, {Label::Unk});

  return fields_from_distances(frame, std::move(d_occ), std::move(d_trust), std::move(d_unk));
}

namespace {

struct Stencil {
  std::size_t idx[8];
  double w[8];
  bool clamped = false;
};

Stencil make_stencil(const GridFrame& frame, const Vec3& pos) {
  Stencil s;
  int i0[3];
  int i1[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const int n = frame.dims[a];
    double u = (pos[a] - frame.origin[a]) / frame.voxel_size - 0.5;
    const double lo_edge = frame.origin[a];
    const double hi_edge = frame.origin[a] + n * frame.voxel_size;
    if (pos[a] < lo_edge || pos[a] > hi_edge) s.clamped = true;
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    if (n < 2) {
      i0[a] = i1[a] = 0;
      t[a] = 0.0;
      continue;
    }
    int base = static_cast<int>(std::floor(u));
    base = std::min(base, n - 2);
    i0[a] = base;
    i1[a] = base + 1;
    t[a] = u - base;
  }
  int c = 0;
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        s.idx[c] = frame.dims.linear(dx ? i1[0] : i0[0], dy ? i1[1] : i0[1], dz ? i1[2] : i0[2]);
        s.w[c] = (dx ? t[0] : 1.0 - t[0]) * (dy ? t[1] : 1.0 - t[1]) * (dz ? t[2] : 1.0 - t[2]);
        ++c;
      }
    }
  }
  return s;
}

double blend(const Grid3<double>& g, const Stencil& s) {
  double v = 0.0;
  for (int c = 0; c < 8; ++c) v += s.w[c] * g.at_linear(s.idx[c]);
  return v;
}

Vec3 blend(const Grid3<Vec3>& g, const Stencil& s) {
  Vec3 v;
  for (int c = 0; c < 8; ++c) v += g.at_linear(s.idx[c]) * s.w[c];
  return v;
}

void check_position(const Vec3& pos) {
  if (std::isnan(pos.x) || std::isnan(pos.y) || std::isnan(pos.z)) {
    throw std::invalid_argument("query position is NaN");
  }
}

}  // namespace

double interpolate(const Grid3<double>& g, const GridFrame& frame, const Vec3& pos) {
  check_position(pos);
  return blend(g, make_stencil(frame, pos));
}

std::array<std::size_t, 8> stencil_nodes(const GridFrame& frame, const Vec3& pos) {
  check_position(pos);
  const Stencil s = make_stencil(frame, pos);
  std::array<std::size_t, 8> out{};
  std::copy(std::begin(s.idx), std::end(s.idx), out.begin());
  return out;
}

FieldQueryResult query(const DistanceFieldSet& fields, const VoxelPartition& partition, const Vec3& pos) {
  check_position(pos);
  const Stencil s = make_stencil(fields.frame, pos);
  FieldQueryResult r;
  r.label = partition.label_at(pos);
  r.d_occ = blend(fields.d_occ, s);
  r.d_trust = blend(fields.d_trust, s);
  r.d_unk = blend(fields.d_unk, s);
  r.grad_occ = blend(fields.grad_occ, s);
  r.grad_trust = blend(fields.grad_trust, s);
  r.grad_unk = blend(fields.grad_unk, s);
  r.clamped = s.clamped;
  return r;
}

// --- EGSF ------------------------------------------------------------------

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw std::invalid_argument("truncated EGSF data");
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(static_cast<U>(in[pos + b]) << (8 * b));
  pos += sizeof(U);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_egsf(const FieldBundle& bundle) {
  const GridFrame& f = bundle.partition.frame;
  if (!(f == bundle.fields.frame)) throw std::invalid_argument("partition and fields frames differ");
  const std::size_t n = f.dims.count();
  std::vector<std::uint8_t> out;
  out.reserve(4 + 2 + 12 + 32 + n * 13);
  for (char c : {'E', 'G', 'S', 'F'}) out.push_back(static_cast<std::uint8_t>(c));
  put_le<std::uint16_t>(out, kEgsfVersion);
  for (int a = 0; a < 3; ++a) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.dims[a]));
  for (int a = 0; a < 3; ++a) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(f.origin[a]));
  put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(f.voxel_size));
  for (Label l : bundle.partition.labels.data()) out.push_back(static_cast<std::uint8_t>(l));
  for (const Grid3<double>* g : {&bundle.fields.d_occ, &bundle.fields.d_trust, &bundle.fields.d_unk}) {
    for (double v : g->data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

FieldBundle decode_egsf(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "EGSF", 4) != 0) throw std::invalid_argument("not an EGSF file");
  std::size_t pos = 4;
  const auto version = get_le<std::uint16_t>(in, pos);
  if (version != kEgsfVersion) throw std::invalid_argument("unsupported EGSF version " + std::to_string(version));
  GridFrame f;
  std::uint32_t d[3];
  for (auto& v : d) v = get_le<std::uint32_t>(in, pos);
  if (d[0] == 0 || d[1] == 0 || d[2] == 0 || d[0] > 4096 || d[1] > 4096 || d[2] > 4096)
    throw std::invalid_argument("bad EGSF dims");
  f.dims = {static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2])};
  for (int a = 0; a < 3; ++a) f.origin[a] = std::bit_cast<double>(get_le<std::uint64_t>(in, pos));
  f.voxel_size = std::bit_cast<double>(get_le<std::uint64_t>(in, pos));
  if (!(f.voxel_size > 0.0)) throw std::invalid_argument("bad EGSF voxel size");

  const std::size_t n = f.dims.count();
  if (in.size() != pos + n * 13) throw std::invalid_argument("EGSF payload size mismatch");

  FieldBundle b;
  b.partition.frame = f;
  b.partition.labels = Grid3<Label>(f.dims, Label::Unk);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t code = in[pos++];
    if (code < 1 || code > 3) throw std::invalid_argument("bad EGSF label code");
    b.partition.labels.at_linear(i) = static_cast<Label>(code);
  }
  Grid3<double> grids[3] = {Grid3<double>(f.dims, 0.0), Grid3<double>(f.dims, 0.0), Grid3<double>(f.dims, 0.0)};
  for (auto& g : grids) {
    for (std::size_t i = 0; i < n; ++i) {
      g.at_linear(i) = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in, pos)));
    }
  }
  b.fields = fields_from_distances(f, std::move(grids[0]), std::move(grids[1]), std::move(grids[2]));
  return b;
}

void save_egsf(const FieldBundle& bundle, const std::string& path) {
  const auto bytes = encode_egsf(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FieldBundle load_egsf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_egsf(bytes);
}

}  // namespace energs
