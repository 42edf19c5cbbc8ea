#include "cvrpsd/instance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "cvrpsd/error.hpp"

namespace cvrpsd {

CostMatrix::CostMatrix(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (values_.size() != dim_ * dim_) {
    throw DataError("cost matrix has " + std::to_string(values_.size()) +
                    " entries, expected " + std::to_string(dim_ * dim_));
  }
}

CostMatrix build_cost_matrix(std::span<const Point> coords, Rounding rounding) {
  if (coords.size() < 2) throw UsageError("cost matrix needs at least 2 nodes");
  for (const Point& p : coords) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw DataError("non-finite coordinate");
    }
  }
  const std::size_t dim = coords.size() + 1;
  auto location = [&](std::size_t node) -> const Point& {
    return node + 1 == dim ? coords[0] : coords[node];
  };
  std::vector<double> values(dim * dim, 0.0);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a + 1; b < dim; ++b) {
      const Point& pa = location(a);
      const Point& pb = location(b);
      double d = std::hypot(pa.x - pb.x, pa.y - pb.y);
      if (rounding == Rounding::nearest_integer) d = std::floor(d + 0.5);
      values[a * dim + b] = d;
      values[b * dim + a] = d;
    }
  }
  return CostMatrix(dim, std::move(values));
}

CvrpInstance CvrpInstance::from_coordinates(std::string name, std::vector<Point> coords,
                                            std::vector<int> nominal_demands,
                                            std::int64_t capacity, Rounding rounding) {
  if (coords.size() != nominal_demands.size() + 1) {
    throw DataError("expected " + std::to_string(nominal_demands.size() + 1) +
                    " coordinates (depot + customers), got " + std::to_string(coords.size()));
  }
  CvrpInstance inst;
  inst.name_ = std::move(name);
  inst.cost_ = build_cost_matrix(coords, rounding);
  coords.push_back(coords.front());
  inst.coords_ = std::move(coords);
  inst.nominal_ = std::move(nominal_demands);
  inst.capacity_ = capacity;
  inst.rounding_ = rounding;
  inst.integral_ = rounding == Rounding::nearest_integer;
  inst.validate();
  return inst;
}

CvrpInstance CvrpInstance::from_matrix(std::string name, CostMatrix cost,
                                       std::vector<int> nominal_demands, std::int64_t capacity,
                                       bool integral) {
  CvrpInstance inst;
  inst.name_ = std::move(name);
  inst.cost_ = std::move(cost);
  inst.nominal_ = std::move(nominal_demands);
  inst.capacity_ = capacity;
  inst.integral_ = integral;
  inst.rounding_ = integral ? Rounding::nearest_integer : Rounding::exact;
  inst.validate();
  return inst;
}

void CvrpInstance::validate() const {
  if (capacity_ < 1) throw DataError("capacity must be positive");
  if (nominal_.empty()) throw DataError("instance has no customers");
  const std::size_t dim = nominal_.size() + 2;
  if (cost_.dim() != dim) {
    throw DataError("cost matrix dimension " + std::to_string(cost_.dim()) + " does not match " +
                    std::to_string(nominal_.size()) + " customers");
  }
  for (std::size_t c = 0; c < nominal_.size(); ++c) {
    if (nominal_[c] < 0) throw DataError("negative demand for customer " + std::to_string(c + 1));
  }
  const std::size_t ret = dim - 1;
  for (std::size_t a = 0; a < dim; ++a) {
    if (cost_(a, a) != 0.0) throw DataError("nonzero diagonal cost at node " + std::to_string(a));
    for (std::size_t b = 0; b < dim; ++b) {
      const double c = cost_(a, b);
      if (!std::isfinite(c) || c < 0.0) {
        throw DataError("cost(" + std::to_string(a) + "," + std::to_string(b) +
                        ") must be finite and nonnegative");
      }
      if (integral_ && c != std::floor(c)) {
        throw DataError("integral instance has fractional cost at (" + std::to_string(a) + "," +
                        std::to_string(b) + ")");
      }
    }
    // Departure and return depot share a location.
    if (a != 0 && a != ret && (cost_(0, a) != cost_(ret, a) || cost_(a, 0) != cost_(a, ret))) {
      throw DataError("depot rows 0 and " + std::to_string(ret) + " differ at node " +
                      std::to_string(a));
    }
  }
  if (cost_(0, ret) != 0.0 || cost_(ret, 0) != 0.0) {
    throw DataError("departure and return depot must coincide");
  }
}

double CvrpInstance::mean_arc_cost() const {
  const std::size_t nodes = customers() + 1;
  if (nodes < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t a = 0; a < nodes; ++a) {
    for (std::size_t b = 0; b < nodes; ++b) {
      if (a != b) sum += cost_(a, b);
    }
  }
  return sum / static_cast<double>(nodes * (nodes - 1));
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, std::size_t line, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

enum class Section { header, coords, demands, depots, done };

}  // namespace

CvrpInstance parse_instance(std::string_view text, Rounding rounding) {
  std::string name = "unnamed";
  std::optional<std::size_t> dimension;
  std::optional<std::int64_t> capacity;
  std::map<long, Point> coords;
  std::map<long, long> demands;
  std::vector<long> depots;
  Section section = Section::header;
  std::size_t line_no = 0;
  std::size_t capacity_line = 0;

  std::size_t pos = 0;
  while (pos <= text.size() && section != Section::done) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }

    if (line == "NODE_COORD_SECTION") { section = Section::coords; continue; }
    if (line == "DEMAND_SECTION") { section = Section::demands; continue; }
    if (line == "DEPOT_SECTION") { section = Section::depots; continue; }
    if (line == "EOF") { section = Section::done; continue; }

    const auto colon = line.find(':');
    if (colon != std::string_view::npos) {
      const std::string_view key = trim(line.substr(0, colon));
      const std::string_view value = trim(line.substr(colon + 1));
      if (key == "NAME") {
        name = std::string(value);
      } else if (key == "DIMENSION") {
        dimension = parse_number<std::size_t>(value, line_no, "DIMENSION");
      } else if (key == "CAPACITY") {
        capacity = parse_number<std::int64_t>(value, line_no, "CAPACITY");
        capacity_line = line_no;
      } else if (key == "EDGE_WEIGHT_TYPE") {
        if (value != "EUC_2D") {
          throw ParseError(line_no, "unsupported EDGE_WEIGHT_TYPE '" + std::string(value) + "'");
        }
      } else if (key == "TYPE") {
        if (value != "CVRP") throw ParseError(line_no, "unsupported TYPE '" + std::string(value) + "'");
      }
      // COMMENT and other header keys are ignored.
      section = Section::header;
      continue;
    }

    const auto fields = tokens(line);
    switch (section) {
      case Section::coords: {
        if (fields.size() != 3) throw ParseError(line_no, "coordinate line needs 'id x y'");
        const long id = parse_number<long>(fields[0], line_no, "node id");
        const Point p{parse_number<double>(fields[1], line_no, "x coordinate"),
                      parse_number<double>(fields[2], line_no, "y coordinate")};
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
          throw ParseError(line_no, "non-finite coordinate");
        }
        if (!coords.emplace(id, p).second) throw ParseError(line_no, "duplicate node id " + std::to_string(id));
        break;
      }
      case Section::demands: {
        if (fields.size() != 2) throw ParseError(line_no, "demand line needs 'id demand'");
        const long id = parse_number<long>(fields[0], line_no, "node id");
        const long q = parse_number<long>(fields[1], line_no, "demand");
        if (q < 0) throw ParseError(line_no, "negative demand");
        if (q > 65535) throw ParseError(line_no, "demand exceeds 65535");
        if (!demands.emplace(id, q).second) throw ParseError(line_no, "duplicate demand for node " + std::to_string(id));
        break;
      }
      case Section::depots: {
        for (auto f : fields) {
          const long id = parse_number<long>(f, line_no, "depot id");
          if (id == -1) break;
          depots.push_back(id);
        }
        break;
      }
      default:
        throw ParseError(line_no, "unexpected content '" + std::string(line) + "'");
    }
  }

  if (!capacity) throw ParseError(line_no, "missing CAPACITY");
  if (*capacity < 1) throw ParseError(capacity_line, "capacity must be positive");
  if (coords.empty()) throw ParseError(line_no, "missing NODE_COORD_SECTION");
  const std::size_t dim = dimension.value_or(coords.size());
  if (coords.size() != dim) {
    throw ParseError(line_no, "DIMENSION is " + std::to_string(dim) + " but " +
                                  std::to_string(coords.size()) + " coordinates were given");
  }
  long expected = 1;
  for (const auto& [id, p] : coords) {
    if (id != expected) throw ParseError(line_no, "node ids are not contiguous from 1 (missing " + std::to_string(expected) + ")");
    ++expected;
  }
  if (depots.empty()) depots.push_back(1);
  if (depots.size() != 1) throw ParseError(line_no, "exactly one depot is supported");
  const long depot = depots.front();
  if (!coords.contains(depot)) throw ParseError(line_no, "depot " + std::to_string(depot) + " has no coordinates");
  if (dim < 2) throw ParseError(line_no, "instance has no customers");

  std::vector<Point> points{coords.at(depot)};
  std::vector<int> nominal;
  for (const auto& [id, p] : coords) {
    if (id == depot) continue;
    points.push_back(p);
    const auto it = demands.find(id);
    if (it == demands.end()) throw ParseError(line_no, "missing demand for node " + std::to_string(id));
    nominal.push_back(static_cast<int>(it->second));
  }
  return CvrpInstance::from_coordinates(std::move(name), std::move(points), std::move(nominal),
                                        *capacity, rounding);
}

CvrpInstance load_instance(const std::string& path, Rounding rounding) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open instance file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_instance(buffer.str(), rounding);
}

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string render_instance(const CvrpInstance& instance) {
  if (!instance.has_coordinates()) throw UsageError("only coordinate instances can be rendered");
  const std::size_t n = instance.customers();
  std::ostringstream out;
  out << "NAME : " << instance.name() << '\n'
      << "TYPE : CVRP\n"
      << "DIMENSION : " << n + 1 << '\n'
      << "EDGE_WEIGHT_TYPE : EUC_2D\n"
      << "CAPACITY : " << instance.capacity() << '\n'
      << "NODE_COORD_SECTION\n";
  const auto coords = instance.coords();
  for (std::size_t v = 0; v <= n; ++v) {
    out << v + 1 << ' ' << shortest(coords[v].x) << ' ' << shortest(coords[v].y) << '\n';
  }
  out << "DEMAND_SECTION\n1 0\n";
  for (std::size_t c = 1; c <= n; ++c) out << c + 1 << ' ' << instance.nominal_demands()[c - 1] << '\n';
  out << "DEPOT_SECTION\n1\n-1\nEOF\n";
  return out.str();
}

CvrpInstance make_synthetic_instance(const SyntheticOptions& options) {
  if (options.customers < 1) throw UsageError("synthetic instance needs at least one customer");
  if (options.demand_lo < 0 || options.demand_hi < options.demand_lo || options.demand_hi > 65535) {
    throw UsageError("invalid synthetic demand range");
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> coord(0, static_cast<int>(options.grid));
  std::uniform_int_distribution<int> demand(options.demand_lo, options.demand_hi);
  std::vector<Point> points{{options.grid / 2, options.grid / 2}};
  std::vector<int> nominal;
  long total = 0;
  for (std::size_t c = 0; c < options.customers; ++c) {
    const double x = coord(rng);
    const double y = coord(rng);
    points.push_back({x, y});
    nominal.push_back(demand(rng));
    total += nominal.back();
  }
  const double mean = static_cast<double>(total) / static_cast<double>(options.customers);
  const int max_q = *std::max_element(nominal.begin(), nominal.end());
  auto capacity = static_cast<std::int64_t>(std::ceil(mean * options.customers_per_route));
  capacity = std::max<std::int64_t>({capacity, max_q, 1});
  return CvrpInstance::from_coordinates("synthetic-n" + std::to_string(options.customers) + "-s" +
                                            std::to_string(options.seed),
                                        std::move(points), std::move(nominal), capacity,
                                        options.rounding);
}

GiantTour make_tour(const CvrpInstance& instance, std::vector<int> order) {
  const std::size_t n = instance.customers();
  if (order.size() != n) {
    throw DataError("tour has " + std::to_string(order.size()) + " entries, instance has " +
                    std::to_string(n) + " customers");
  }
  std::vector<char> seen(n + 1, 0);
  for (int c : order) {
    if (c < 1 || static_cast<std::size_t>(c) > n) {
      throw DataError("customer " + std::to_string(c) + " out of range 1.." + std::to_string(n));
    }
    if (seen[c]) throw DataError("duplicate customer " + std::to_string(c));
    seen[c] = 1;
  }

  GiantTour tour;
  tour.integral_ = instance.integral_costs();
  tour.chain_.assign(n + 1, 0.0);
  tour.depart_.assign(n + 1, 0.0);
  tour.back_.assign(n + 1, 0.0);
  const std::size_t ret = instance.return_depot();
  for (std::size_t k = 1; k <= n; ++k) {
    const auto c = static_cast<std::size_t>(order[k - 1]);
    tour.depart_[k] = instance.cost(0, c);
    tour.back_[k] = instance.cost(c, ret);
    if (k > 1) {
      tour.chain_[k] = tour.chain_[k - 1] + instance.cost(static_cast<std::size_t>(order[k - 2]), c);
    }
  }
  tour.order_ = std::move(order);
  return tour;
}

GiantTour identity_tour(const CvrpInstance& instance) {
  std::vector<int> order(instance.customers());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k + 1);
  return make_tour(instance, std::move(order));
}

}  // namespace cvrpsd
