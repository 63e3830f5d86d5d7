#include "koopman_hjb/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace koopman_hjb {

using nlohmann::json;

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

/// JSON objects carry no source positions; the first occurrence of the quoted
/// key is a good enough anchor for diagnostics.
int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

class Reader {
 public:
  Reader(const std::string& text, const json& node, std::string path)
      : text_(text), node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_.empty() ? "top level must be an object" : "must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& item : node_.items()) {
      if (!ok.count(item.key())) {
        throw ConfigError("unknown key '" + qualified(item.key()) + "'",
                          line_of_key(text_, item.key()));
      }
    }
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  Reader child(const std::string& key) const {
    if (!has(key)) return Reader(text_, empty_object(), qualified(key));
    return Reader(text_, node_.at(key), qualified(key));
  }

  template <typename T>
  T get(const std::string& key, const T& fallback) const {
    if (!has(key)) return fallback;
    return required<T>(key);
  }

  template <typename T>
  T required(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing key '" + qualified(key) + "'", line_of_key(text_, path_tail()));
    try {
      return node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("wrong type for '" + qualified(key) + "'", line_of_key(text_, key));
    }
  }

  const json& raw(const std::string& key) const { return node_.at(key); }

  [[noreturn]] void fail_key(const std::string& key, const std::string& why) const {
    throw ConfigError("'" + qualified(key) + "' " + why, line_of_key(text_, key));
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError((path_.empty() ? std::string("config") : "'" + path_ + "'") + " " + why,
                      line_of_key(text_, path_tail()));
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  static const json& empty_object() {
    static const json e = json::object();
    return e;
  }
  std::string path_tail() const {
    const auto dot = path_.rfind('.');
    return dot == std::string::npos ? path_ : path_.substr(dot + 1);
  }

  const std::string& text_;
  const json& node_;
  std::string path_;
};

Eigen::MatrixXd read_matrix(const Reader& r, const std::string& key) {
  const auto rows = r.required<std::vector<std::vector<double>>>(key);
  if (rows.empty() || rows.front().empty()) r.fail_key(key, "must be a non-empty matrix");
  Eigen::MatrixXd M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) r.fail_key(key, "has ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  }
  return M;
}

json write_matrix(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::vector<double> row(M.cols());
    for (Eigen::Index j = 0; j < M.cols(); ++j) row[j] = M(i, j);
    rows.push_back(row);
  }
  return rows;
}

PolyField read_poly(const Reader& r, const std::string& key, int dim) {
  const json& comps = r.raw(key);
  if (!comps.is_array()) r.fail_key(key, "must be a list of components");
  std::vector<std::vector<Monomial>> out;
  for (const auto& comp : comps) {
    if (!comp.is_array()) r.fail_key(key, "components must be lists of terms");
    std::vector<Monomial> terms;
    for (const auto& term : comp) {
      if (!term.is_object()) r.fail_key(key, "terms must be objects");
      for (const auto& item : term.items()) {
        if (item.key() != "coeff" && item.key() != "exponents") {
          r.fail_key(key, "term has unknown key '" + item.key() + "'");
        }
      }
      try {
        terms.push_back({term.at("exponents").get<std::vector<int>>(), term.at("coeff").get<double>()});
      } catch (const json::exception&) {
        r.fail_key(key, "terms need numeric 'coeff' and integer 'exponents'");
      }
    }
    out.push_back(std::move(terms));
  }
  try {
    return PolyField(dim, std::move(out));
  } catch (const std::invalid_argument& e) {
    r.fail_key(key, e.what());
  }
}

json write_poly(const PolyField& p) {
  json comps = json::array();
  for (const auto& comp : p.components()) {
    json terms = json::array();
    for (const auto& m : comp) terms.push_back({{"coeff", m.coeff}, {"exponents", m.exponents}});
    comps.push_back(terms);
  }
  return comps;
}

template <typename E>
E read_enum(const Reader& r, const std::string& key, E fallback,
            std::initializer_list<std::pair<const char*, E>> names) {
  if (!r.has(key)) return fallback;
  const auto s = r.required<std::string>(key);
  for (const auto& [name, value] : names) {
    if (s == name) return value;
  }
  r.fail_key(key, "has unsupported value '" + s + "'");
}

void require(bool ok, const Reader& r, const std::string& key, const char* why) {
  if (!ok) r.fail_key(key, why);
}

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

bool SystemSpec::operator==(const SystemSpec& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case SystemKind::vanderpol:
      return vanderpol.mu == o.vanderpol.mu && vanderpol.eta == o.vanderpol.eta &&
             vanderpol.alpha == o.vanderpol.alpha && vanderpol.gamma == o.vanderpol.gamma;
    case SystemKind::linear:
      return same(A, o.A) && same(b, o.b) && same(C, o.C);
    case SystemKind::polynomial:
      return f_poly == o.f_poly && b_poly == o.b_poly && c_poly == o.c_poly;
  }
  return false;
}

bool RunConfig::operator==(const RunConfig& o) const {
  const auto& v = validation;
  const auto& ov = o.validation;
  return lower == o.lower && upper == o.upper && weight == o.weight && n_grid == o.n_grid &&
         degree == o.degree && vanish_at_origin == o.vanish_at_origin &&
         quad_order == o.quad_order && split_at_origin == o.split_at_origin &&
         system == o.system && tangent_samples == o.tangent_samples && tol == o.tol && max_iter == o.max_iter && init == o.init &&
         damping == o.damping && sigma_clip == o.sigma_clip &&
         v.n_trajectories == ov.n_trajectories && v.simulation.t_final == ov.simulation.t_final &&
         v.simulation.rtol == ov.simulation.rtol && v.hjb_sample_grid == ov.hjb_sample_grid &&
         v.hjb_lower == ov.hjb_lower && v.hjb_upper == ov.hjb_upper &&
         v.candidate_grid == ov.candidate_grid && thresholds.cost_gap == o.thresholds.cost_gap &&
         thresholds.hjb_median == o.thresholds.hjb_median &&
         thresholds.hessian_gap == o.thresholds.hessian_gap && lqr_tolerance == o.lqr_tolerance &&
         output_directory == o.output_directory && emit_svg == o.emit_svg &&
         grid_points == o.grid_points;
}

SolverConfig RunConfig::solver_config() const {
  SolverConfig s;
  s.tol = tol;
  s.max_iter = max_iter;
  s.init = init;
  s.damping = damping;
  s.sigma_clip = sigma_clip;
  return s;
}

ControlAffineSystem RunConfig::build_system() const {
  const BoxDomain dom = domain();
  switch (system.kind) {
    case SystemKind::vanderpol: {
      if (dom.dim() != 2) throw std::invalid_argument("the vanderpol preset needs a 2-d domain");
      const auto vdp = vanderpol_preset(system.vanderpol);
      return ControlAffineSystem(vdp.f(), vdp.b(), vdp.c(), dom);
    }
    case SystemKind::linear:
      return linear_preset(system.A, system.b, system.C, dom);
    case SystemKind::polynomial:
      return ControlAffineSystem(system.f_poly, system.b_poly, system.c_poly, dom);
  }
  throw std::logic_error("unreachable");
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string what = e.what();
    const auto colon = what.find("syntax error");
    throw ConfigError("JSON " + (colon == std::string::npos ? what : what.substr(colon)),
                      line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1));
  }

  RunConfig cfg;
  const Reader top(text, root, "");
  top.allow({"domain", "weight", "basis", "quadrature", "system", "solver", "validate", "output"});

  const Reader dom = top.child("domain");
  dom.allow({"lower", "upper"});
  cfg.lower = dom.required<std::vector<double>>("lower");
  cfg.upper = dom.required<std::vector<double>>("upper");
  try {
    (void)cfg.domain();
  } catch (const std::invalid_argument& e) {
    dom.fail(e.what());
  }
  const int d = static_cast<int>(cfg.lower.size());

  const Reader w = top.child("weight");
  w.allow({"kind", "floor"});
  cfg.weight.kind = read_enum(w, "kind", WeightKind::inverse_norm,
                              {{"inverse_norm", WeightKind::inverse_norm}, {"constant", WeightKind::constant}});
  cfg.weight.floor = w.get("floor", 0.0);
  require(cfg.weight.floor >= 0.0, w, "floor", "must be >= 0");

  const Reader b = top.child("basis");
  b.allow({"n_grid", "degree", "vanish_at_origin"});
  cfg.n_grid = b.get("n_grid", cfg.n_grid);
  cfg.degree = b.get("degree", cfg.degree);
  cfg.vanish_at_origin = b.get("vanish_at_origin", cfg.vanish_at_origin);
  require(cfg.n_grid >= 2, b, "n_grid", "must be >= 2");
  require(cfg.degree >= 1 && cfg.degree <= 12, b, "degree", "must be in [1, 12]");

  const Reader q = top.child("quadrature");
  q.allow({"order", "split_at_origin"});
  if (q.has("order")) {
    cfg.quad_order = q.required<int>("order");
    require(*cfg.quad_order >= 1 && *cfg.quad_order <= 64, q, "order", "must be in [1, 64]");
  }
  cfg.split_at_origin = q.get("split_at_origin", cfg.split_at_origin);

  const Reader sys = top.child("system");
  sys.allow({"preset", "parameters", "A", "b", "C", "f", "c", "tangent_samples"});
  cfg.tangent_samples = sys.get("tangent_samples", cfg.tangent_samples);
  require(cfg.tangent_samples >= 2, sys, "tangent_samples", "must be >= 2");
  const auto preset = sys.get<std::string>("preset", "vanderpol");
  if (preset == "vanderpol") {
    cfg.system.kind = SystemKind::vanderpol;
    const Reader p = sys.child("parameters");
    p.allow({"mu", "eta", "alpha", "gamma"});
    auto& vp = cfg.system.vanderpol;
    vp.mu = p.get("mu", vp.mu);
    vp.eta = p.get("eta", vp.eta);
    vp.alpha = p.get("alpha", vp.alpha);
    vp.gamma = p.get("gamma", vp.gamma);
    for (const char* k : {"A", "b", "C", "f", "c"}) {
      if (sys.has(k)) sys.fail_key(k, "is not used by the vanderpol preset");
    }
  } else if (preset == "linear") {
    cfg.system.kind = SystemKind::linear;
    cfg.system.A = read_matrix(sys, "A");
    const auto bv = sys.required<std::vector<double>>("b");
    cfg.system.b = Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size()));
    cfg.system.C = read_matrix(sys, "C");
    for (const char* k : {"parameters", "f", "c"}) {
      if (sys.has(k)) sys.fail_key(k, "is not used by the linear preset");
    }
  } else if (preset == "polynomial") {
    cfg.system.kind = SystemKind::polynomial;
    cfg.system.f_poly = read_poly(sys, "f", d);
    cfg.system.b_poly = read_poly(sys, "b", d);
    cfg.system.c_poly = read_poly(sys, "c", d);
    for (const char* k : {"parameters", "A", "C"}) {
      if (sys.has(k)) sys.fail_key(k, "is not used by the polynomial preset");
    }
  } else {
    sys.fail_key("preset", "must be one of vanderpol, linear, polynomial");
  }
  try {
    (void)cfg.build_system();
  } catch (const std::invalid_argument& e) {
    sys.fail(e.what());
  }

  const Reader s = top.child("solver");
  s.allow({"tol", "max_iter", "init", "damping", "sigma_clip"});
  cfg.tol = s.get("tol", cfg.tol);
  cfg.max_iter = s.get("max_iter", cfg.max_iter);
  cfg.init = read_enum(s, "init", cfg.init, {{"zero", InitKind::zero}, {"lqr_lift", InitKind::lqr_lift}});
  cfg.damping = read_enum(s, "damping", cfg.damping,
                          {{"off", Damping::off}, {"backtracking", Damping::backtracking}});
  cfg.sigma_clip = s.get("sigma_clip", cfg.sigma_clip);
  require(cfg.tol > 0.0, s, "tol", "must be > 0");
  require(cfg.max_iter >= 1, s, "max_iter", "must be >= 1");
  require(cfg.sigma_clip >= 0.0, s, "sigma_clip", "must be >= 0");

  const Reader v = top.child("validate");
  v.allow({"n_trajectories", "t_final", "rtol", "hjb_sample_grid", "hjb_box", "candidate_grid",
           "cost_gap", "hjb_median", "hessian_gap", "lqr_tolerance"});
  auto& vs = cfg.validation;
  vs.n_trajectories = v.get("n_trajectories", vs.n_trajectories);
  vs.simulation.t_final = v.get("t_final", vs.simulation.t_final);
  vs.simulation.rtol = v.get("rtol", vs.simulation.rtol);
  vs.hjb_sample_grid = v.get("hjb_sample_grid", vs.hjb_sample_grid);
  vs.candidate_grid = v.get("candidate_grid", vs.candidate_grid);
  require(vs.n_trajectories >= 0, v, "n_trajectories", "must be >= 0");
  require(vs.simulation.t_final > 0.0, v, "t_final", "must be > 0");
  require(vs.simulation.rtol > 0.0, v, "rtol", "must be > 0");
  require(vs.hjb_sample_grid >= 0, v, "hjb_sample_grid", "must be >= 0");
  require(vs.candidate_grid >= 1, v, "candidate_grid", "must be >= 1");
  if (v.has("hjb_box")) {
    const Reader box = v.child("hjb_box");
    box.allow({"lower", "upper"});
    vs.hjb_lower = box.required<std::vector<double>>("lower");
    vs.hjb_upper = box.required<std::vector<double>>("upper");
    require(static_cast<int>(vs.hjb_lower.size()) == d && static_cast<int>(vs.hjb_upper.size()) == d,
            v, "hjb_box", "must match the domain dimension");
    for (int k = 0; k < d; ++k) {
      require(vs.hjb_lower[k] < vs.hjb_upper[k] && vs.hjb_lower[k] >= cfg.lower[k] &&
                  vs.hjb_upper[k] <= cfg.upper[k],
              v, "hjb_box", "must be a non-empty box inside the domain");
    }
  }
  cfg.thresholds.cost_gap = v.get("cost_gap", cfg.thresholds.cost_gap);
  cfg.thresholds.hjb_median = v.get("hjb_median", cfg.thresholds.hjb_median);
  cfg.thresholds.hessian_gap = v.get("hessian_gap", cfg.thresholds.hessian_gap);
  cfg.lqr_tolerance = v.get("lqr_tolerance", cfg.lqr_tolerance);
  require(cfg.thresholds.cost_gap > 0.0, v, "cost_gap", "must be > 0");
  require(cfg.thresholds.hjb_median > 0.0, v, "hjb_median", "must be > 0");
  require(cfg.thresholds.hessian_gap > 0.0, v, "hessian_gap", "must be > 0");
  require(cfg.lqr_tolerance > 0.0, v, "lqr_tolerance", "must be > 0");

  const Reader o = top.child("output");
  o.allow({"directory", "emit_svg", "grid_points"});
  cfg.output_directory = o.get("directory", cfg.output_directory);
  cfg.emit_svg = o.get("emit_svg", cfg.emit_svg);
  cfg.grid_points = o.get("grid_points", cfg.grid_points);
  require(!cfg.output_directory.empty(), o, "directory", "must not be empty");
  require(cfg.grid_points >= 2, o, "grid_points", "must be >= 2");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_json(const RunConfig& cfg) {
  json j;
  j["domain"] = {{"lower", cfg.lower}, {"upper", cfg.upper}};
  j["weight"] = {{"kind", cfg.weight.kind == WeightKind::inverse_norm ? "inverse_norm" : "constant"},
                 {"floor", cfg.weight.floor}};
  j["basis"] = {{"n_grid", cfg.n_grid}, {"degree", cfg.degree}, {"vanish_at_origin", cfg.vanish_at_origin}};
  j["quadrature"] = {{"split_at_origin", cfg.split_at_origin}};
  if (cfg.quad_order) j["quadrature"]["order"] = *cfg.quad_order;

  json sys;
  switch (cfg.system.kind) {
    case SystemKind::vanderpol: {
      const auto& p = cfg.system.vanderpol;
      sys = {{"preset", "vanderpol"},
             {"parameters", {{"mu", p.mu}, {"eta", p.eta}, {"alpha", p.alpha}, {"gamma", p.gamma}}}};
      break;
    }
    case SystemKind::linear:
      sys = {{"preset", "linear"},
             {"A", write_matrix(cfg.system.A)},
             {"b", std::vector<double>(cfg.system.b.data(), cfg.system.b.data() + cfg.system.b.size())},
             {"C", write_matrix(cfg.system.C)}};
      break;
    case SystemKind::polynomial:
      sys = {{"preset", "polynomial"},
             {"f", write_poly(cfg.system.f_poly)},
             {"b", write_poly(cfg.system.b_poly)},
             {"c", write_poly(cfg.system.c_poly)}};
      break;
  }
  sys["tangent_samples"] = cfg.tangent_samples;
  j["system"] = sys;

  j["solver"] = {{"tol", cfg.tol},
                 {"max_iter", cfg.max_iter},
                 {"init", cfg.init == InitKind::zero ? "zero" : "lqr_lift"},
                 {"damping", cfg.damping == Damping::off ? "off" : "backtracking"},
                 {"sigma_clip", cfg.sigma_clip}};
  const auto& vs = cfg.validation;
  j["validate"] = {{"n_trajectories", vs.n_trajectories},
                   {"t_final", vs.simulation.t_final},
                   {"rtol", vs.simulation.rtol},
                   {"hjb_sample_grid", vs.hjb_sample_grid},
                   {"candidate_grid", vs.candidate_grid},
                   {"cost_gap", cfg.thresholds.cost_gap},
                   {"hjb_median", cfg.thresholds.hjb_median},
                   {"hessian_gap", cfg.thresholds.hessian_gap},
                   {"lqr_tolerance", cfg.lqr_tolerance}};
  if (!vs.hjb_lower.empty()) j["validate"]["hjb_box"] = {{"lower", vs.hjb_lower}, {"upper", vs.hjb_upper}};
  j["output"] = {{"directory", cfg.output_directory}, {"emit_svg", cfg.emit_svg}, {"grid_points", cfg.grid_points}};
  return j.dump(2) + "\n";
}

}  // namespace koopman_hjb
