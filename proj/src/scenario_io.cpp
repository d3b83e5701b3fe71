#include "ellmpc/scenario_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace ellmpc {

using Json = nlohmann::json;
using Pointer = Json::json_pointer;

ScenarioError::ScenarioError(const std::string& source, int line, const std::string& field, const std::string& message)
    : std::invalid_argument(source + ":" + std::to_string(line) + ": " + (field.empty() ? "" : field + ": ") + message),
      line_(line),
      field_(field) {}

namespace {

int line_at(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Character iterator that publishes how far the lexer has read.
struct CountingIterator {
  using iterator_category = std::forward_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p = nullptr;
  const char* base = nullptr;
  std::size_t* consumed = nullptr;

  reference operator*() const { return *p; }
  CountingIterator& operator++() {
    ++p;
    *consumed = static_cast<std::size_t>(p - base);
    return *this;
  }
  CountingIterator operator++(int) {
    CountingIterator old = *this;
    ++*this;
    return old;
  }
  bool operator==(const CountingIterator& o) const { return p == o.p; }
};

// SAX pass recording the line of every value, keyed by JSON pointer.
class LineRecorder {
 public:
  LineRecorder(std::string_view text, const std::size_t* consumed) : text_(text), consumed_(consumed) {}

  std::map<std::string, int> lines;

  bool null() { return scalar(); }
  bool boolean(bool) { return scalar(); }
  bool number_integer(Json::number_integer_t) { return scalar(); }
  bool number_unsigned(Json::number_unsigned_t) { return scalar(); }
  bool number_float(Json::number_float_t, const std::string&) { return scalar(); }
  bool string(std::string&) { return scalar(); }
  bool binary(Json::binary_t&) { return scalar(); }
  bool start_object(std::size_t) { return open(false); }
  bool start_array(std::size_t) { return open(true); }
  bool end_object() { return close(); }
  bool end_array() { return close(); }
  bool key(std::string& k) {
    stack_.back().key = k;
    lines[pointer()] = current_line();
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) { return false; }

 private:
  struct Frame {
    bool array;
    std::string key;
    int index = 0;
  };

  int current_line() const {
    std::size_t end = *consumed_;
    while (end > 0 && std::isspace(static_cast<unsigned char>(text_[end - 1]))) --end;
    return line_at(text_, end == 0 ? 0 : end - 1);
  }
  std::string pointer() const {
    Pointer ptr;
    for (const auto& f : stack_) ptr.push_back(f.array ? std::to_string(f.index) : f.key);
    return ptr.to_string();
  }
  void record() {
    const std::string p = pointer();
    if (!lines.count(p)) lines[p] = current_line();
  }
  void advance() {
    if (!stack_.empty() && stack_.back().array) ++stack_.back().index;
  }
  bool scalar() {
    record();
    advance();
    return true;
  }
  bool open(bool array) {
    record();
    stack_.push_back({array, {}, 0});
    return true;
  }
  bool close() {
    stack_.pop_back();
    advance();
    return true;
  }

  std::string_view text_;
  const std::size_t* consumed_;
  std::vector<Frame> stack_;
};

struct Document {
  std::string source;
  std::map<std::string, int> lines;
  std::filesystem::path base_dir;

  int line_of(const Pointer& ptr) const {
    Pointer p = ptr;
    while (true) {
      const auto it = lines.find(p.to_string());
      if (it != lines.end()) return it->second;
      if (p.empty()) return 1;
      p.pop_back();
    }
  }
  [[noreturn]] void fail(const Pointer& ptr, const std::string& message) const { fail(ptr, line_of(ptr), message); }
  [[noreturn]] void fail(const Pointer& ptr, int line, const std::string& message) const {
    std::string field = ptr.to_string();
    if (!field.empty()) field.erase(0, 1);
    std::replace(field.begin(), field.end(), '/', '.');
    throw ScenarioError(source, line, field, message);
  }
};

class Node {
 public:
  Node(const Document& doc, const Json& value, Pointer ptr) : doc_(&doc), value_(&value), ptr_(std::move(ptr)) {}

  const Json& json() const { return *value_; }
  const Pointer& ptr() const { return ptr_; }
  [[noreturn]] void fail(const std::string& message) const { doc_->fail(ptr_, message); }

  void expect_object(std::initializer_list<std::string_view> allowed) const {
    if (!value_->is_object()) fail("expected an object");
    for (const auto& [k, v] : value_->items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) Node(*doc_, v, ptr_ / k).fail("unknown field");
    }
  }
  bool has(const std::string& key) const { return value_->is_object() && value_->contains(key); }
  Node at(const std::string& key) const {
    if (!has(key)) doc_->fail(ptr_ / key, doc_->line_of(ptr_), "missing required field");
    return {*doc_, (*value_)[key], ptr_ / key};
  }
  std::optional<Node> find(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return Node(*doc_, (*value_)[key], ptr_ / key);
  }
  std::vector<Node> elements() const {
    if (!value_->is_array()) fail("expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < value_->size(); ++i) out.emplace_back(*doc_, (*value_)[i], ptr_ / i);
    return out;
  }

  double number() const {
    if (!value_->is_number()) fail("expected a number");
    const double v = value_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be > 0");
    return v;
  }
  double nonnegative() const {
    const double v = number();
    if (v < 0.0) fail("must be >= 0");
    return v;
  }
  long long integer() const {
    if (!value_->is_number_integer()) fail("expected an integer");
    return value_->get<long long>();
  }
  bool boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }
  std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }
  std::vector<double> numbers(std::size_t count) const {
    const auto items = elements();
    if (items.size() != count) fail("expected " + std::to_string(count) + " numbers");
    std::vector<double> out;
    for (const auto& e : items) out.push_back(e.number());
    return out;
  }
  Eigen::Vector2d vec2() const {
    const auto v = numbers(2);
    return {v[0], v[1]};
  }
  std::pair<double, double> range() const {
    const auto v = numbers(2);
    if (!(v[0] < v[1])) fail("expected [min, max] with min < max");
    return {v[0], v[1]};
  }

  double number_or(const std::string& key, double fallback) const { return has(key) ? at(key).number() : fallback; }
  double positive_or(const std::string& key, double fallback) const {
    return has(key) ? at(key).positive() : fallback;
  }

 private:
  const Document* doc_;
  const Json* value_;
  Pointer ptr_;
};

int checked_int(const Node& n, long long lo, long long hi) {
  const long long v = n.integer();
  if (v < lo || v > hi) n.fail("must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

Pose read_pose(const Node& n) {
  n.expect_object({"position", "heading"});
  Pose p;
  p.position = n.at("position").vec2();
  p.heading = n.number_or("heading", 0.0);
  return p;
}

void read_robot(const Node& n, Scenario& sc) {
  n.expect_object({"axes", "axes_are_full_lengths", "limits"});
  const Node axes = n.at("axes");
  const auto a = axes.numbers(2);
  if (!(a[0] > 0.0) || !(a[1] > 0.0)) axes.fail("axes must be > 0");
  const bool full = n.has("axes_are_full_lengths") ? n.at("axes_are_full_lengths").boolean() : true;
  sc.robot = full ? RobotShape::from_full_axes(a[0], a[1]) : RobotShape(a[0], a[1]);
  if (const auto lim = n.find("limits")) {
    lim->expect_object({"v", "omega", "a", "alpha"});
    if (const auto v = lim->find("v")) std::tie(sc.limits.v_min, sc.limits.v_max) = v->range();
    if (const auto v = lim->find("omega")) std::tie(sc.limits.omega_min, sc.limits.omega_max) = v->range();
    if (const auto v = lim->find("a")) std::tie(sc.limits.a_min, sc.limits.a_max) = v->range();
    if (const auto v = lim->find("alpha")) std::tie(sc.limits.alpha_min, sc.limits.alpha_max) = v->range();
    try {
      sc.limits.validate();
    } catch (const std::invalid_argument& e) {
      lim->fail(e.what());
    }
  }
}

void read_weights(const Node& n, Weights& w) {
  n.expect_object({"state", "input", "terminal"});
  auto vec = [](const Node& node, std::size_t count) {
    const auto v = node.numbers(count);
    for (double x : v)
      if (x < 0.0) node.fail("weights must be >= 0");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(count)).eval();
  };
  if (const auto s = n.find("state")) w.state = vec(*s, 5);
  if (const auto s = n.find("input")) w.input = vec(*s, 2);
  if (const auto s = n.find("terminal")) w.terminal = vec(*s, 5);
}

ObstacleSet read_obstacles(const Node& n) {
  std::vector<Ellipsoid> obs;
  for (const auto& o : n.elements()) {
    o.expect_object({"center", "semi_axes", "angle"});
    const Eigen::Vector2d c = o.at("center").vec2();
    const Node axes = o.at("semi_axes");
    const auto a = axes.numbers(2);
    if (!(a[0] > 0.0) || !(a[1] > 0.0)) axes.fail("semi-axes must be > 0 (shape must be positive definite)");
    obs.push_back(Ellipsoid::from_axes_2d(c, a[0], a[1], o.number_or("angle", 0.0)));
  }
  return ObstacleSet(std::move(obs));
}

OccupancyGrid read_map(const Node& n, const Document& doc, const ObstacleSet& obstacles) {
  n.expect_object({"resolution", "origin", "rows", "file", "width", "height"});
  const double res = n.at("resolution").positive();
  const Eigen::Vector2d origin = n.has("origin") ? n.at("origin").vec2() : Eigen::Vector2d::Zero();
  const int sources = int(n.has("rows")) + int(n.has("file")) + int(n.has("width") || n.has("height"));
  if (sources != 1) n.fail("exactly one of 'rows', 'file' or 'width'/'height' is required");
  std::string text;
  if (const auto rows = n.find("rows")) {
    for (const auto& r : rows->elements()) text += r.string() + "\n";
  } else if (const auto file = n.find("file")) {
    std::filesystem::path p = file->string();
    if (p.is_relative()) p = doc.base_dir / p;
    std::ifstream in(p);
    if (!in) file->fail("cannot read map file '" + p.string() + "'");
    text.assign(std::istreambuf_iterator<char>(in), {});
  } else {
    const int w = checked_int(n.at("width"), 1, 100000), h = checked_int(n.at("height"), 1, 100000);
    return OccupancyGrid::rasterize(obstacles, w, h, res, origin);
  }
  try {
    OccupancyGrid grid = OccupancyGrid::from_text(text, res, origin);
    // Obstacles are always marked on top of the drawn map.
    const OccupancyGrid raster = OccupancyGrid::rasterize(obstacles, grid.width(), grid.height(), res, origin);
    for (int iy = 0; iy < grid.height(); ++iy)
      for (int ix = 0; ix < grid.width(); ++ix)
        if (raster.occupied(ix, iy)) grid.set_occupied(ix, iy, true);
    return grid;
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
}

// Bounding grid around start, goal and obstacles with a 1 m border.
OccupancyGrid default_grid(const Scenario& sc) {
  constexpr double kRes = 0.05, kBorder = 1.0;
  Eigen::Vector2d lo = sc.start.position.cwiseMin(sc.goal.position);
  Eigen::Vector2d hi = sc.start.position.cwiseMax(sc.goal.position);
  for (int m = 0; m < sc.obstacles.size(); ++m) {
    const Eigen::Matrix2d& s = sc.obstacles.shape(m);
    const Eigen::Vector2d ext(std::sqrt(s(0, 0)), std::sqrt(s(1, 1)));
    lo = lo.cwiseMin(sc.obstacles.center(m) - ext);
    hi = hi.cwiseMax(sc.obstacles.center(m) + ext);
  }
  lo.array() -= kBorder;
  hi.array() += kBorder;
  const int w = static_cast<int>(std::ceil((hi.x() - lo.x()) / kRes));
  const int h = static_cast<int>(std::ceil((hi.y() - lo.y()) / kRes));
  return OccupancyGrid::rasterize(sc.obstacles, w, h, kRes, lo);
}

void check_endpoint(const Node& n, const Scenario& sc, const Pose& pose) {
  const auto cell = sc.grid.cell_of(pose.position);
  if (!cell) n.fail("position lies outside the map");
  if (sc.grid.occupied(cell->first, cell->second)) n.fail("position lies in an occupied map cell");
  const Ellipsoid robot(pose.position, rotate_shape(sc.robot, pose.heading));
  for (int m = 0; m < sc.obstacles.size(); ++m)
    if (interiors_overlap(robot, sc.obstacles[m])) n.fail("robot overlaps obstacle " + std::to_string(m));
}

ScenarioFile build(const Json& root, const Document& doc) {
  const Node top(doc, root, Pointer());
  top.expect_object({"name", "robot", "horizon", "weights", "terminal_eps", "obstacles", "map", "start", "goal", "mode",
                     "safety_margin", "solver", "reference", "simulation"});
  ScenarioFile out;
  Scenario& sc = out.scenario;
  out.name = top.has("name") ? top.at("name").string() : std::string("scenario");

  if (const auto r = top.find("robot")) read_robot(*r, sc);
  if (const auto h = top.find("horizon")) {
    h->expect_object({"T", "N"});
    sc.horizon_time = h->positive_or("T", sc.horizon_time);
    if (h->has("N")) sc.horizon_steps = checked_int(h->at("N"), 1, 1000);
  }
  if (const auto w = top.find("weights")) read_weights(*w, sc.weights);
  if (const auto e = top.find("terminal_eps")) {
    e->expect_object({"v", "omega"});
    sc.eps_v = e->positive_or("v", sc.eps_v);
    sc.eps_omega = e->positive_or("omega", sc.eps_omega);
  }
  if (const auto o = top.find("obstacles")) sc.obstacles = read_obstacles(*o);
  if (const auto m = top.find("mode")) {
    try {
      sc.mode.kind = parse_constraint_kind(m->string());
    } catch (const std::invalid_argument&) {
      m->fail("expected one of free-gamma, fixed-gamma, free-eta, fixed-eta");
    }
  }
  if (const auto m = top.find("safety_margin")) sc.mode.safety_margin = m->nonnegative();

  const Node start = top.at("start"), goal = top.at("goal");
  sc.start = read_pose(start);
  sc.goal = read_pose(goal);
  sc.grid = top.has("map") ? read_map(top.at("map"), doc, sc.obstacles) : default_grid(sc);
  check_endpoint(start, sc, sc.start);
  check_endpoint(goal, sc, sc.goal);

  RunSettings& rs = out.settings;
  if (const auto s = top.find("solver")) {
    s->expect_object({"max_sqp_iters", "kkt_tol", "reg", "qp_max_iters", "qp_tol", "parameter_curvature"});
    if (s->has("max_sqp_iters")) rs.solver.max_sqp_iters = checked_int(s->at("max_sqp_iters"), 1, 100000);
    rs.solver.kkt_tol = s->positive_or("kkt_tol", rs.solver.kkt_tol);
    if (s->has("reg")) rs.solver.gamma_block_reg = s->at("reg").nonnegative();
    if (s->has("qp_max_iters")) rs.solver.qp_max_iters = checked_int(s->at("qp_max_iters"), 1, 100000);
    rs.solver.qp_tol = s->positive_or("qp_tol", rs.solver.qp_tol);
    if (s->has("parameter_curvature")) rs.solver.parameter_curvature = s->at("parameter_curvature").boolean();
  }
  if (const auto r = top.find("reference")) {
    r->expect_object({"v_max", "a_max", "lookahead"});
    rs.reference.v_max = r->positive_or("v_max", rs.reference.v_max);
    rs.reference.a_max = r->positive_or("a_max", rs.reference.a_max);
    rs.reference.lookahead = r->number_or("lookahead", rs.reference.lookahead);
  }
  if (const auto s = top.find("simulation")) {
    s->expect_object({"max_steps", "goal_tolerance", "seed", "disturbance"});
    if (s->has("max_steps")) rs.simulation.max_steps = checked_int(s->at("max_steps"), 0, 10000000);
    rs.simulation.goal_tolerance = s->positive_or("goal_tolerance", rs.simulation.goal_tolerance);
    if (s->has("seed")) {
      const Node seed = s->at("seed");
      if (!seed.json().is_number_unsigned()) seed.fail("expected a nonnegative integer");
      rs.simulation.seed = seed.json().get<std::uint64_t>();
    }
    if (s->has("disturbance")) rs.simulation.disturbance = s->at("disturbance").nonnegative();
  }

  try {
    sc.validate();
    rs.solver.validate();
    rs.reference.validate();
    rs.simulation.validate();
  } catch (const std::invalid_argument& e) {
    top.fail(e.what());
  }
  return out;
}

}  // namespace

ScenarioFile parse_scenario(std::string_view text, const std::string& source, const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ScenarioError(source, line_at(text, e.byte == 0 ? 0 : e.byte - 1), "", "invalid JSON");
  }
  Document doc{source, {}, base_dir};
  std::size_t consumed = 0;
  LineRecorder recorder(text, &consumed);
  const CountingIterator first{text.data(), text.data(), &consumed};
  const CountingIterator last{text.data() + text.size(), text.data(), &consumed};
  Json::sax_parse(first, last, &recorder);
  doc.lines = std::move(recorder.lines);
  return build(root, doc);
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string(), 0, "", "cannot open file");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_scenario(text, path.string(), path.parent_path());
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

class CsvRow {
 public:
  explicit CsvRow(std::ostream& out) : out_(out) {}
  ~CsvRow() { out_ << "\r\n"; }
  CsvRow& operator<<(double v) { return cell(format_number(v)); }
  CsvRow& operator<<(int v) { return cell(std::to_string(v)); }
  CsvRow& operator<<(std::string_view s) { return cell(csv_field(s)); }
  CsvRow& operator<<(const char* s) { return cell(csv_field(s)); }

 private:
  CsvRow& cell(const std::string& s) {
    if (!first_) out_ << ',';
    first_ = false;
    out_ << s;
    return *this;
  }
  std::ostream& out_;
  bool first_ = true;
};

void header(std::ostream& out, std::initializer_list<const char*> names) {
  CsvRow row(out);
  for (const char* n : names) row << n;
}

const char* mode_key(int i) {
  static constexpr const char* kKeys[] = {"free_gamma", "fixed_gamma", "free_eta", "fixed_eta"};
  return kKeys[i];
}

// JSON numbers must be finite.
nlohmann::ordered_json num(double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); }

nlohmann::ordered_json quantiles(const std::vector<double>& v) {
  nlohmann::ordered_json q;
  q["count"] = v.size();
  if (v.empty()) return q;
  q["min"] = num(*std::min_element(v.begin(), v.end()));
  q["median"] = num(median(v));
  q["p90"] = num(quantile(v, 0.9));
  q["p99"] = num(quantile(v, 0.99));
  q["max"] = num(*std::max_element(v.begin(), v.end()));
  return q;
}

nlohmann::ordered_json scenario_header(const ScenarioFile& file, ConstraintKind mode) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["scenario"] = file.name;
  j["mode"] = to_string(mode);
  j["safety_margin"] = file.scenario.mode.safety_margin;
  j["dt"] = file.scenario.dt();
  j["horizon_steps"] = file.scenario.horizon_steps;
  j["obstacles"] = file.scenario.obstacles.size();
  return j;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const RunLog& log) {
  header(out, {"step", "time", "px", "py", "theta", "v", "omega", "a", "alpha", "objective", "sqp_iterations",
               "qp_iterations", "status", "kkt_residual", "max_slack", "tracking_error"});
  {
    const RobotState& x = log.initial_state;
    CsvRow row(out);
    row << 0 << 0.0 << x.px << x.py << x.theta << x.v << x.omega << "" << "" << "" << "" << "" << "" << "" << ""
        << distance_to_path(log.path, x.position());
  }
  for (const auto& s : log.steps) {
    CsvRow row(out);
    row << s.step + 1 << s.time << s.state.px << s.state.py << s.state.theta << s.state.v << s.state.omega << s.input.a
        << s.input.alpha << s.objective << s.sqp_iterations << s.qp_iterations << to_string(s.status)
        << s.kkt_residual << s.max_slack << s.tracking_error;
  }
}

void write_clearances_csv(std::ostream& out, const RunLog& log) {
  header(out, {"step", "time", "obstacle", "clearance", "overlap"});
  for (const auto& s : log.steps)
    for (std::size_t m = 0; m < s.clearance.size(); ++m) {
      CsvRow row(out);
      row << s.step + 1 << s.time << static_cast<int>(m) << s.clearance[m] << (s.overlap[m] ? 1 : 0);
    }
}

nlohmann::ordered_json run_summary(const ScenarioFile& file, const RunLog& log) {
  nlohmann::ordered_json j = scenario_header(file, log.mode);
  j["steps"] = log.steps.size();
  j["goal_reached"] = log.goal_reached;
  j["any_overlap"] = log.any_overlap;
  j["qp_failures"] = log.qp_failures;
  int not_converged = 0;
  std::vector<double> objective, solve_ms, tracking;
  for (const auto& s : log.steps) {
    if (s.status != SqpStatus::Converged) ++not_converged;
    objective.push_back(s.objective);
    solve_ms.push_back(s.solve_ms);
    tracking.push_back(s.tracking_error);
  }
  j["not_converged"] = not_converged;
  nlohmann::ordered_json mc = nlohmann::ordered_json::array();
  for (double c : log.min_clearance()) mc.push_back(num(c));
  j["min_clearance"] = mc;
  j["path_length"] = path_length(log.path);
  j["max_tracking_error"] = tracking.empty() ? 0.0 : *std::max_element(tracking.begin(), tracking.end());
  j["objective"] = quantiles(objective);
  if (is_fixed(log.mode)) {
    nlohmann::ordered_json frozen = nlohmann::ordered_json::array();
    for (const auto& s : log.steps) {
      nlohmann::ordered_json entry;
      entry["step"] = s.step;
      if (log.mode == ConstraintKind::MinkowskiFixedGamma) {
        entry["gamma_hat"] = s.gamma_hat;
      } else {
        nlohmann::ordered_json stages = nlohmann::ordered_json::array();
        for (const auto& stage : s.eta_hat) {
          nlohmann::ordered_json per = nlohmann::ordered_json::array();
          for (const auto& e : stage) per.push_back({e.x(), e.y()});
          stages.push_back(per);
        }
        entry["eta_hat"] = stages;
      }
      frozen.push_back(entry);
    }
    j["frozen_parameters"] = frozen;
  }
  // Wall-clock values last; everything above is reproducible.
  j["solve_time_ms"] = quantiles(solve_ms);
  return j;
}

void write_comparison_csv(std::ostream& out, const ComparisonResult& result) {
  header(out, {"step", "time", "objective_free_gamma", "objective_fixed_gamma", "objective_free_eta",
               "objective_fixed_eta", "converged_free_gamma", "converged_fixed_gamma", "converged_free_eta",
               "converged_fixed_eta", "relative_cost_fixed_gamma", "relative_cost_free_eta",
               "relative_cost_fixed_eta"});
  for (const auto& r : result.records) {
    CsvRow row(out);
    row << r.step << r.time;
    for (double o : r.objective) row << o;
    for (bool c : r.converged) row << (c ? 1 : 0);
    for (int i = 1; i < 4; ++i) {
      if (r.valid(i))
        row << r.relative_cost[static_cast<std::size_t>(i)];
      else
        row << "";
    }
  }
}

void write_exceedance_csv(std::ostream& out, const ComparisonResult& result) {
  header(out, {"threshold", "fraction_fixed_gamma", "fraction_free_eta", "fraction_fixed_eta"});
  std::array<std::vector<double>, 4> values;
  for (const auto& r : result.records)
    for (int i = 1; i < 4; ++i)
      if (r.valid(i)) values[static_cast<std::size_t>(i)].push_back(r.relative_cost[static_cast<std::size_t>(i)]);
  // Thresholds 1e-10 .. 1 in steps of a tenth of a decade.
  for (int k = -100; k <= 0; ++k) {
    const double x = std::pow(10.0, k / 10.0);
    CsvRow row(out);
    row << x;
    for (int i = 1; i < 4; ++i) {
      const auto& v = values[static_cast<std::size_t>(i)];
      if (v.empty()) {
        row << "";
        continue;
      }
      const auto above = std::count_if(v.begin(), v.end(), [x](double c) { return c > x; });
      row << static_cast<double>(above) / static_cast<double>(v.size());
    }
  }
}

void write_timing_csv(std::ostream& out, const ComparisonResult& result) {
  header(out, {"step", "ms_free_gamma", "ms_fixed_gamma", "ms_free_eta", "ms_fixed_eta", "objective_free_gamma",
               "objective_fixed_gamma", "objective_free_eta", "objective_fixed_eta"});
  for (const auto& r : result.records) {
    CsvRow row(out);
    row << r.step;
    for (double t : r.early_ms) row << t;
    for (double o : r.early_objective) row << o;
  }
}

nlohmann::ordered_json comparison_summary(const ScenarioFile& file, const ComparisonResult& result) {
  nlohmann::ordered_json j = scenario_header(file, ConstraintKind::MinkowskiFreeGamma);
  j["comparison_safety_margin"] = 0.0;
  j["steps"] = result.records.size();
  j["goal_reached"] = result.run.goal_reached;
  j["any_overlap"] = result.run.any_overlap;
  j["qp_failures"] = result.run.qp_failures;
  nlohmann::ordered_json modes;
  for (int i = 0; i < 4; ++i) {
    int converged = 0, valid = 0, below = 0;
    std::vector<double> rel;
    for (const auto& r : result.records) {
      if (r.converged[static_cast<std::size_t>(i)]) ++converged;
      if (i > 0 && r.valid(i)) {
        ++valid;
        const double c = r.relative_cost[static_cast<std::size_t>(i)];
        rel.push_back(c);
        if (r.objective[static_cast<std::size_t>(i)] < r.objective[0] - 1e-8) ++below;
      }
    }
    nlohmann::ordered_json m;
    m["converged"] = converged;
    if (i > 0) {
      m["valid_records"] = valid;
      m["relative_cost"] = quantiles(rel);
      m["objective_below_free"] = below;
    }
    modes[mode_key(i)] = m;
  }
  j["modes"] = modes;
  nlohmann::ordered_json timing;
  timing["max_sqp_iters"] = 2;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> ms;
    for (const auto& r : result.records) ms.push_back(r.early_ms[static_cast<std::size_t>(i)]);
    timing[mode_key(i)] = quantiles(ms);
  }
  j["timing_ms"] = timing;
  return j;
}

void write_path_csv(std::ostream& out, const PathPolyline& path) {
  header(out, {"index", "x", "y"});
  for (std::size_t i = 0; i < path.size(); ++i) {
    CsvRow row(out);
    row << static_cast<int>(i) << path[i].x() << path[i].y();
  }
}

void write_reference_csv(std::ostream& out, const ReferenceTrajectory& reference) {
  header(out, {"k", "time", "px", "py", "theta", "v", "omega", "a", "alpha"});
  for (std::size_t k = 0; k < reference.states.size(); ++k) {
    const RobotState& x = reference.states[k];
    CsvRow row(out);
    row << static_cast<int>(k) << reference.timestamps[k] << x.px << x.py << x.theta << x.v << x.omega;
    if (k < reference.inputs.size())
      row << reference.inputs[k].a << reference.inputs[k].alpha;
    else
      row << "" << "";
  }
}

}  // namespace ellmpc
