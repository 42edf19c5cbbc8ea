#include "cvrpsd/scenario.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <random>
#include <sstream>

#include <omp.h>

#include "cvrpsd/error.hpp"
#include "cvrpsd/parallel.hpp"

namespace cvrpsd {

const char* to_string(DemandKind kind) {
  switch (kind) {
    case DemandKind::fixed: return "fixed";
    case DemandKind::uniform_integer: return "uniform";
    case DemandKind::truncated_normal: return "normal";
    case DemandKind::correlated: return "correlated";
  }
  return "unknown";
}

DemandKind demand_kind_from_string(const std::string& name) {
  if (name == "fixed") return DemandKind::fixed;
  if (name == "uniform" || name == "uniform-integer") return DemandKind::uniform_integer;
  if (name == "normal" || name == "truncated-normal") return DemandKind::truncated_normal;
  if (name == "correlated" || name == "common-factor-correlated") return DemandKind::correlated;
  throw UsageError("unknown demand model '" + name + "'");
}

DemandModel DemandModel::fixed(std::vector<int> nominal, std::uint64_t seed) {
  DemandModel m;
  m.kind = DemandKind::fixed;
  m.nominal = std::move(nominal);
  m.seed = seed;
  return m;
}

DemandModel DemandModel::uniform(std::vector<int> nominal, double lo_frac, double hi_frac,
                                 std::uint64_t seed) {
  DemandModel m = fixed(std::move(nominal), seed);
  m.kind = DemandKind::uniform_integer;
  m.lo_frac = lo_frac;
  m.hi_frac = hi_frac;
  return m;
}

DemandModel DemandModel::truncated_normal(std::vector<int> nominal, double cv, std::uint64_t seed) {
  DemandModel m = fixed(std::move(nominal), seed);
  m.kind = DemandKind::truncated_normal;
  m.cv = cv;
  return m;
}

DemandModel DemandModel::correlated(std::vector<int> nominal, double cv, double factor_weight,
                                    std::uint64_t seed) {
  DemandModel m = fixed(std::move(nominal), seed);
  m.kind = DemandKind::correlated;
  m.cv = cv;
  m.factor_weight = factor_weight;
  return m;
}

DemandModel DemandModel::with_seed(std::uint64_t new_seed) const {
  DemandModel m = *this;
  m.seed = new_seed;
  return m;
}

std::string DemandModel::describe() const {
  std::ostringstream out;
  out << to_string(kind);
  switch (kind) {
    case DemandKind::fixed: break;
    case DemandKind::uniform_integer: out << "(lo=" << lo_frac << ",hi=" << hi_frac << ')'; break;
    case DemandKind::truncated_normal: out << "(cv=" << cv << ')'; break;
    case DemandKind::correlated: out << "(cv=" << cv << ",rho=" << factor_weight << ')'; break;
  }
  out << " seed=" << seed;
  return out.str();
}

void DemandModel::validate() const {
  if (nominal.empty()) throw UsageError("demand model has no customers");
  for (int q : nominal) {
    if (q < 0 || q > kMaxDemand) throw UsageError("nominal demand out of range [0, 65535]");
  }
  if (kind == DemandKind::uniform_integer && !(lo_frac >= 0.0 && lo_frac <= hi_frac)) {
    throw UsageError("uniform model needs 0 <= lo_frac <= hi_frac");
  }
  if ((kind == DemandKind::truncated_normal || kind == DemandKind::correlated) && !(cv >= 0.0)) {
    throw UsageError("cv must be nonnegative");
  }
  if (kind == DemandKind::correlated && !(factor_weight >= 0.0 && factor_weight <= 1.0)) {
    throw UsageError("factor weight must lie in [0, 1]");
  }
}

DemandMatrixView::DemandMatrixView(std::span<const std::uint16_t> data, std::size_t rows,
                                   std::size_t cols)
    : data_(data), rows_(rows), cols_(cols) {
  if (data.size() != rows * cols) throw DataError("demand view size mismatch");
}

DemandMatrixView DemandMatrixView::head(std::size_t count) const {
  count = std::min(count, rows_);
  return {data_.first(count * cols_), count, cols_};
}

ScenarioSet::ScenarioSet(DemandModel model, std::size_t customers, std::vector<std::uint16_t> demands)
    : model_(std::move(model)), customers_(customers), demands_(std::move(demands)) {
  if (customers_ == 0) throw DataError("scenario set needs at least one customer");
  if (demands_.size() % customers_ != 0) throw DataError("demand matrix is not m x n");
  if (!model_.nominal.empty() && model_.nominal.size() != customers_) {
    throw DataError("model nominal length does not match customer count");
  }
  q_max_ = demands_.empty() ? 0 : *std::max_element(demands_.begin(), demands_.end());
}

namespace {

// splitmix64 finalizer; turns (seed, scenario) into a well-spread engine seed.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint16_t clamp_demand(double v) {
  if (!(v > 0.0)) return 0;
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint16_t>(std::min(r, static_cast<double>(kMaxDemand)));
}

void sample_row(const DemandModel& model, std::uint64_t scenario, std::span<std::uint16_t> out) {
  const auto& nominal = model.nominal;
  if (model.kind == DemandKind::fixed) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = static_cast<std::uint16_t>(nominal[c]);
    return;
  }
  std::mt19937_64 rng(mix(model.seed ^ mix(scenario)));
  switch (model.kind) {
    case DemandKind::uniform_integer: {
      for (std::size_t c = 0; c < out.size(); ++c) {
        const double q = nominal[c];
        const auto lo = static_cast<long>(std::floor(q * model.lo_frac + 0.5));
        const auto hi = static_cast<long>(std::floor(q * model.hi_frac + 0.5));
        std::uniform_int_distribution<long> dist(std::min<long>(lo, kMaxDemand),
                                                 std::min<long>(hi, kMaxDemand));
        out[c] = static_cast<std::uint16_t>(dist(rng));
      }
      break;
    }
    case DemandKind::truncated_normal: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t c = 0; c < out.size(); ++c) {
        const double q = nominal[c];
        const double draw = q + model.cv * q * normal(rng);
        out[c] = clamp_demand(std::clamp(draw, 0.0, 2.0 * q));
      }
      break;
    }
    case DemandKind::correlated: {
      std::normal_distribution<double> normal(0.0, model.cv);
      const double g = normal(rng);
      const double rho = model.factor_weight;
      for (std::size_t c = 0; c < out.size(); ++c) {
        const double eps = normal(rng);
        out[c] = clamp_demand(nominal[c] * (1.0 + rho * g + (1.0 - rho) * eps));
      }
      break;
    }
    case DemandKind::fixed: break;
  }
}

}  // namespace

ScenarioSet sample_scenarios(const DemandModel& model, std::size_t m, int workers) {
  if (m == 0) throw UsageError("scenario count must be at least 1");
  model.validate();
  const std::size_t n = model.nominal.size();
  std::vector<std::uint16_t> demands;
  try {
    demands.resize(m * n);
  } catch (const std::bad_alloc&) {
    throw ResourceError("cannot allocate " + std::to_string(m) + " x " + std::to_string(n) +
                        " demand matrix");
  }
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(resolve_workers(workers))
  for (std::int64_t w = 0; w < rows; ++w) {
    sample_row(model, static_cast<std::uint64_t>(w),
               std::span<std::uint16_t>(demands).subspan(static_cast<std::size_t>(w) * n, n));
  }
  return ScenarioSet(model, n, std::move(demands));
}

ScenarioSet replicate_scenario(std::span<const std::uint16_t> row, std::size_t m) {
  if (m == 0) throw UsageError("scenario count must be at least 1");
  std::vector<int> nominal(row.begin(), row.end());
  std::vector<std::uint16_t> demands;
  demands.reserve(m * row.size());
  for (std::size_t w = 0; w < m; ++w) demands.insert(demands.end(), row.begin(), row.end());
  return ScenarioSet(DemandModel::fixed(std::move(nominal)), row.size(), std::move(demands));
}

TourDemandMatrix permute_to_tour_order(DemandMatrixView demands, const GiantTour& tour) {
  const std::size_t n = tour.size();
  if (demands.cols() != n) {
    throw DataError("scenario set has " + std::to_string(demands.cols()) + " customers, tour has " +
                    std::to_string(n));
  }
  TourDemandMatrix out(demands.rows(), n);
  const auto order = tour.order();
  for (std::size_t w = 0; w < demands.rows(); ++w) {
    const auto src = demands.row(w);
    auto dst = out.row(w);
    for (std::size_t k = 0; k < n; ++k) dst[k] = src[static_cast<std::size_t>(order[k]) - 1];
  }
  return out;
}

PrefixMatrix demand_prefix_sums(const TourDemandMatrix& tour_demands) {
  const std::size_t n = tour_demands.cols();
  PrefixMatrix prefix(tour_demands.rows(), n + 1);
  for (std::size_t w = 0; w < tour_demands.rows(); ++w) {
    const auto q = tour_demands.row(w);
    auto s = prefix.row(w);
    s[0] = 0;
    for (std::size_t k = 0; k < n; ++k) s[k + 1] = s[k] + q[k];
  }
  return prefix;
}

// ---------------------------------------------------------------------------
// Scenario file:
//   "SCNS" | version u16 | m u64 | n u32 | q_max u16 | seed u64 |
//   kind u8 | lo f64 | hi f64 | cv f64 | rho f64 | nominal_len u32 | nominal u16[] |
//   demands u16[m*n] | crc32 u32 (over every preceding byte)
// All fields little-endian.

namespace {

constexpr std::array<char, 4> kMagic{'S', 'C', 'N', 'S'};
constexpr std::uint16_t kFormatVersion = 1;

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    std::array<unsigned char, sizeof(T)> raw;
    std::memcpy(raw.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }
  void put_bytes(const char* data, std::size_t size) { bytes_.insert(bytes_.end(), data, data + size); }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError("scenario file header is truncated");
    std::array<unsigned char, sizeof(T)> raw;
    std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t header_size(const DemandModel& model) {
  return 4 + 2 + 8 + 4 + 2 + 8 + 1 + 4 * 8 + 4 + 2 * model.nominal.size();
}

std::uint32_t crc_update(std::uint32_t crc, const void* data, std::size_t size) {
  return static_cast<std::uint32_t>(crc32_z(crc, static_cast<const Bytef*>(data), size));
}

std::vector<unsigned char> encode_header(const ScenarioSet& set) {
  ByteWriter w;
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put<std::uint16_t>(kFormatVersion);
  w.put<std::uint64_t>(set.scenarios());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.customers()));
  w.put<std::uint16_t>(set.q_max());
  w.put<std::uint64_t>(set.seed());
  const DemandModel& model = set.model();
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.kind));
  w.put<double>(model.lo_frac);
  w.put<double>(model.hi_frac);
  w.put<double>(model.cv);
  w.put<double>(model.factor_weight);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.nominal.size()));
  for (int q : model.nominal) w.put<std::uint16_t>(static_cast<std::uint16_t>(q));
  return w.bytes();
}

}  // namespace

std::uint64_t scenario_file_size(const DemandModel& model, std::size_t m, std::size_t n) {
  return header_size(model) + 2ULL * m * n + 4;
}

std::uint32_t save_scenarios(const ScenarioSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot open '" + path.string() + "' for writing");
  const auto header = encode_header(set);
  std::uint32_t crc = crc_update(0, header.data(), header.size());
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));

  const auto demands = set.demands();
  if constexpr (std::endian::native == std::endian::little) {
    crc = crc_update(crc, demands.data(), demands.size_bytes());
    out.write(reinterpret_cast<const char*>(demands.data()),
              static_cast<std::streamsize>(demands.size_bytes()));
  } else {
    for (std::uint16_t q : demands) {
      const unsigned char le[2] = {static_cast<unsigned char>(q & 0xFF),
                                   static_cast<unsigned char>(q >> 8)};
      crc = crc_update(crc, le, 2);
      out.write(reinterpret_cast<const char*>(le), 2);
    }
  }
  ByteWriter trailer;
  trailer.put<std::uint32_t>(crc);
  out.write(reinterpret_cast<const char*>(trailer.bytes().data()), 4);
  out.flush();
  if (!out) throw ResourceError("failed writing scenario file '" + path.string() + "'");
  return crc;
}

ScenarioSet load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scenario file '" + path.string() + "'");
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw DataError("cannot stat scenario file '" + path.string() + "'");

  // Fixed part of the header, then the nominal vector.
  constexpr std::size_t kFixed = 4 + 2 + 8 + 4 + 2 + 8 + 1 + 4 * 8 + 4;
  if (file_size < kFixed + 4) throw DataError("scenario file is truncated");
  std::vector<unsigned char> header(kFixed);
  in.read(reinterpret_cast<char*>(header.data()), kFixed);
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
    throw DataError("scenario file has wrong magic (expected SCNS)");
  }
  ByteReader r(std::span<const unsigned char>(header).subspan(4));
  const auto version = r.get<std::uint16_t>();
  if (version != kFormatVersion) throw DataError("unsupported scenario file version " + std::to_string(version));
  const auto m = r.get<std::uint64_t>();
  const auto n = r.get<std::uint32_t>();
  const auto q_max = r.get<std::uint16_t>();
  DemandModel model;
  model.seed = r.get<std::uint64_t>();
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(DemandKind::correlated)) throw DataError("unknown demand model tag");
  model.kind = static_cast<DemandKind>(kind);
  model.lo_frac = r.get<double>();
  model.hi_frac = r.get<double>();
  model.cv = r.get<double>();
  model.factor_weight = r.get<double>();
  const auto nominal_len = r.get<std::uint32_t>();
  if (n == 0 || (nominal_len != 0 && nominal_len != n)) throw DataError("scenario file dimensions are inconsistent");

  const std::uint64_t expected = kFixed + 2ULL * nominal_len + 2ULL * m * n + 4;
  if (file_size < expected) throw DataError("scenario file is truncated");
  if (file_size > expected) throw DataError("scenario file has trailing bytes");

  std::uint32_t crc = crc_update(0, header.data(), header.size());
  std::vector<unsigned char> nominal_raw(2ULL * nominal_len);
  in.read(reinterpret_cast<char*>(nominal_raw.data()), static_cast<std::streamsize>(nominal_raw.size()));
  crc = crc_update(crc, nominal_raw.data(), nominal_raw.size());
  ByteReader nr(nominal_raw);
  for (std::uint32_t c = 0; c < nominal_len; ++c) model.nominal.push_back(nr.get<std::uint16_t>());

  std::vector<std::uint16_t> demands;
  try {
    demands.resize(static_cast<std::size_t>(m) * n);
  } catch (const std::bad_alloc&) {
    throw ResourceError("cannot allocate demand matrix for '" + path.string() + "'");
  }
  in.read(reinterpret_cast<char*>(demands.data()), static_cast<std::streamsize>(demands.size() * 2));
  if (!in) throw DataError("scenario file is truncated");
  crc = crc_update(crc, demands.data(), demands.size() * 2);
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& q : demands) q = static_cast<std::uint16_t>((q >> 8) | (q << 8));
  }
  unsigned char trailer_raw[4];
  in.read(reinterpret_cast<char*>(trailer_raw), 4);
  if (!in) throw DataError("scenario file is truncated");
  const auto stored = ByteReader(trailer_raw).get<std::uint32_t>();
  if (stored != crc) throw DataError("scenario file checksum mismatch");

  ScenarioSet set(std::move(model), n, std::move(demands));
  if (set.q_max() != q_max) throw DataError("scenario file q_max does not match its payload");
  return set;
}

}  // namespace cvrpsd
