#include "sepfilter/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sepfilter {

namespace {

using nlohmann::json;

VectorXd parse_vector(const json& j) {
  if (!j.is_array()) throw ScenarioError("expected an array");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

MatrixXd parse_matrix(const json& j) {
  if (!j.is_array()) throw ScenarioError("expected a matrix");
  if (j.empty()) return MatrixXd(0, 0);
  if (!j[0].is_array()) {
    // 1-D array: column vector
    MatrixXd m(j.size(), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(i, 0) = j[i].get<double>();
    return m;
  }
  MatrixXd m(j.size(), j[0].size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size())
      throw ScenarioError("ragged matrix rows");
    for (std::size_t k = 0; k < j[i].size(); ++k)
      m(i, k) = j[i][k].get<double>();
  }
  return m;
}

Coefficient parse_coefficient(const json& j, const std::string& name,
                              int rows, int cols) {
  if (rows == 0) return Coefficient::constant(MatrixXd::Zero(0, cols));
  if (!j.contains("family"))
    throw ScenarioError("coefficient " + name + ": missing family");
  std::string family = j.at("family").get<std::string>();
  const json& p = j.at("params");

  if (family == "constant") {
    MatrixXd v = parse_matrix(p.at("value"));
    if (cols == 1 && v.cols() != 1 && v.rows() == 1) v = v.transpose();
    return Coefficient::constant(v);
  }
  if (family == "affine") {
    MatrixXd c0 = parse_matrix(p.at("c0"));
    if (cols == 1 && c0.cols() != 1 && c0.rows() == 1) c0 = c0.transpose();
    if (cols > 1) {
      MatrixXd cx = p.contains("cx") ? parse_matrix(p.at("cx"))
                                     : MatrixXd::Zero(c0.rows(), c0.cols());
      return Coefficient::affine_matrix(c0, cx);
    }
    MatrixXd cx = p.contains("cx") ? parse_matrix(p.at("cx")) : MatrixXd();
    MatrixXd cy = p.contains("cy") ? parse_matrix(p.at("cy")) : MatrixXd();
    return Coefficient::affine(c0.col(0), cx, cy);
  }
  if (family == "quadratic")
    return Coefficient::quadratic(parse_vector(p.at("qa")),
                                  parse_vector(p.at("qb")),
                                  parse_vector(p.at("qc")));
  if (family == "exp_affine")
    return Coefficient::exp_affine(parse_vector(p.at("eta")),
                                   parse_vector(p.at("scale")));
  if (family == "tabulated")
    return Coefficient::tabulated(parse_vector(p.at("x")),
                                  parse_matrix(p.at("values")));
  throw ScenarioError("coefficient " + name + ": unknown family " + family);
}

}  // namespace

FilterKind parse_filter_kind(const std::string& name) {
  if (name == "kf" || name == "kalman" || name == "kalman_bucy")
    return FilterKind::KalmanBucy;
  if (name == "ekf") return FilterKind::Ekf;
  if (name == "wonham") return FilterKind::Wonham;
  if (name == "particle") return FilterKind::Particle;
  throw ScenarioError("unknown filter_kind: " + name);
}

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::KalmanBucy: return "kf";
    case FilterKind::Ekf: return "ekf";
    case FilterKind::Wonham: return "wonham";
    case FilterKind::Particle: return "particle";
  }
  return "?";
}

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario parse error: ") + e.what());
  }

  Scenario sc;
  try {
    const json& dims = j.at("dims");
    sc.model.dims.ell = dims.value("ell", 0);
    sc.model.dims.n = dims.at("n").get<int>();
    sc.model.dims.m = dims.at("m").get<int>();
    sc.model.dims.m1 = dims.at("m1").get<int>();
    sc.model.dims.k = dims.value("k", 0);
    sc.model.horizon = j.at("horizon").get<double>();

    const json& x0 = j.at("x0");
    if (x0.contains("mean")) {
      sc.model.x0.gaussian = true;
      sc.model.x0.mean = parse_vector(x0.at("mean"));
      sc.model.x0.cov = parse_matrix(x0.at("cov"));
    } else {
      sc.model.x0.gaussian = false;
      sc.model.x0.states = parse_matrix(x0.at("states"));
      sc.model.x0.probs = parse_vector(x0.at("probs"));
      sc.model.chain_generator = parse_matrix(j.at("generator"));
    }
    sc.model.y0 = parse_vector(j.at("y0"));

    const Dimensions& dm = sc.model.dims;
    sc.model.b = parse_coefficient(j.value("b", json()), "b", dm.n, 1);
    sc.model.lambda =
        parse_coefficient(j.value("lambda", json()), "lambda", dm.n, dm.d());
    sc.model.bf = parse_coefficient(j.value("bf", json()), "bf", dm.ell, 1);
    sc.model.lambdaf = parse_coefficient(j.value("lambdaf", json()), "lambdaf",
                                         dm.ell, dm.d());
    sc.model.a = parse_coefficient(j.at("a"), "a", dm.m, 1);
    sc.model.sigma =
        parse_coefficient(j.at("sigma"), "sigma", dm.m, dm.d());
    sc.model.c = parse_coefficient(j.at("c"), "c", 1, 1);
    sc.model.xi = parse_coefficient(j.at("xi"), "xi", 1, dm.d());
    sc.model.aE = parse_coefficient(j.value("aE", json()), "aE", dm.k, 1);
    sc.model.sigmaE =
        parse_coefficient(j.value("sigmaE", json()), "sigmaE", dm.k, dm.d());

    if (j.contains("probe_box")) {
      const json& pb = j.at("probe_box");
      sc.model.probe_x_lo = parse_vector(pb.at("x_lo"));
      sc.model.probe_x_hi = parse_vector(pb.at("x_hi"));
      sc.model.probe_y_lo = parse_vector(pb.at("y_lo"));
      sc.model.probe_y_hi = parse_vector(pb.at("y_hi"));
    }

    if (j.contains("strategy")) {
      const json& st = j.at("strategy");
      std::string kind = st.at("kind").get<std::string>();
      if (kind == "constant") {
        sc.strategy = Strategy::constant(parse_vector(st.at("values")));
      } else if (kind == "linear_in_mean") {
        sc.strategy = Strategy::linear_in_mean(parse_vector(st.at("h0")),
                                               parse_matrix(st.at("Hm")));
      } else {
        throw ScenarioError("unknown strategy kind: " + kind);
      }
    }

    if (j.contains("params")) {
      sc.params.theta = j.at("params").value("theta", 0.5);
      sc.params.r0 = j.at("params").value("r0", 1.0);
    }
    sc.params.T = sc.model.horizon;

    if (j.contains("grid")) {
      sc.grid.t0 = j.at("grid").value("t0", 0.0);
      sc.grid.dt = j.at("grid").at("dt").get<double>();
    }
    sc.grid.T = sc.model.horizon;

    if (j.contains("mc")) {
      sc.mc.n_paths = j.at("mc").value("n_paths", std::size_t(10000));
      sc.mc.seed = j.at("mc").value("seed", std::uint64_t(1));
    }
    if (j.contains("filter_kind"))
      sc.filter_kind = parse_filter_kind(j.at("filter_kind").get<std::string>());
    else if (!sc.model.x0.gaussian)
      sc.filter_kind = FilterKind::Wonham;
    sc.outputs = j.value("outputs", std::string("out"));
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario schema error: ") + e.what());
  }
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace sepfilter
