#include "cli.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "io.hpp"
#include "lcgeom/error.hpp"
#include "lcgeom/fiber.hpp"
#include "lcgeom/identifiability.hpp"
#include "lcgeom/likelihood.hpp"
#include "lcgeom/model.hpp"
#include "lcgeom/reparam.hpp"

namespace lcgeom::cli {

namespace {

using io::Json;

struct Common {
  std::string output;
  std::string format = "csv";
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json array_of(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

// ---- dims -----------------------------------------------------------------

std::string cmd_dims(const std::vector<int>& shape) {
  const Dims d = dims(Shape(shape.at(0), shape.at(1), shape.at(2)));
  Json j;
  j["d"] = d.d;
  j["t"] = d.t;
  j["s"] = d.s;
  j["m"] = d.m;
  j["fiber"] = d.fiber;
  j["case"] = to_string(d.dim_case);
  j["constraints"] = d.constraint_count;
  return j.dump() + "\n";
}

// ---- check ----------------------------------------------------------------

Json describe_cross_ratios(const MarginalTable& marginal, RefCell ref) {
  Json j;
  try {
    const CrossRatios z = cross_ratios(marginal, ref);
    j["cross_ratios"] = io::matrix_to_json(z.values());
    if (marginal.r1() == 3 && marginal.r3() == 3) j["identity_323_residual"] = check_marginal_identity_323(z);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroCell) throw;
    j["cross_ratios"] = nullptr;
    j["cross_ratio_error"] = e.what();
  }
  return j;
}

std::string cmd_check(const std::string& path, const std::vector<int>& ref_cell) {
  const io::AnyTable table = io::table_from_json(io::parse_json(io::read_file(path), path));
  Json j;
  std::optional<JointTable> joint;
  if (const auto* p = std::get_if<ChainParams>(&table)) {
    j["kind"] = "model";
    joint = joint_from_chain(*p);
  } else if (const auto* t = std::get_if<JointTable>(&table)) {
    j["kind"] = "joint";
    joint = *t;
  } else {
    j["kind"] = "marginal";
  }
  const MarginalTable marginal = joint ? marginal_13(*joint) : std::get<MarginalTable>(table);
  const RefCell ref{ref_cell.at(0) - 1, ref_cell.at(1) - 1};
  if (ref.i < 0 || ref.i >= marginal.r1() || ref.k < 0 || ref.k >= marginal.r3())
    throw io::InputError("--ref-cell lies outside the table");
  j["ref_cell"] = {ref.i + 1, ref.k + 1};

  if (joint) {
    const Shape& sh = joint->shape();
    j["shape"] = {sh.r1(), sh.r2(), sh.r3()};
    const std::vector<double> res = ci_residuals(*joint, ref);
    double worst = 0.0;
    for (double r : res) worst = std::max(worst, std::abs(r));
    j["ci_residuals"] = array_of(res);
    j["max_abs_residual"] = worst;
    const SplitTable parts = split(*joint);
    Json lam = Json::array(), flags = Json::array();
    for (int i = 0; i < sh.r1(); ++i) {
      Json row = Json::array(), frow = Json::array();
      for (int k = 0; k < sh.r3(); ++k) {
        Json cell = Json::array();
        for (int jj = 0; jj < sh.r2(); ++jj) cell.push_back(parts.lambdas(i, k, jj));
        row.push_back(std::move(cell));
        frow.push_back(parts.lambdas.unconstrained(i, k));
      }
      lam.push_back(std::move(row));
      flags.push_back(std::move(frow));
    }
    j["lambda"] = std::move(lam);
    j["lambda_unconstrained"] = std::move(flags);
  }
  j["marginal"] = io::matrix_to_json(marginal.cells());
  j.update(describe_cross_ratios(marginal, ref));
  return dump(j);
}

// ---- fig3 -----------------------------------------------------------------

std::string cmd_fig3(double z, double c1, double c2, int samples, const std::string& format) {
  if (!(z > 0.0) || !(c1 >= 0.0 && c1 <= 1.0) || !(c2 >= 0.0 && c2 <= 1.0) || samples < 2)
    throw CLI::ValidationError("fig3", "need z > 0, c1 and c2 in [0,1], samples >= 2");
  const double sum = 1.0 - (1.0 - c1 - c2) / z;
  const double product = c1 * c2 / z;

  std::vector<std::pair<double, double>> line, hyperbola, hits;
  for (int s = 0; s < samples; ++s) {
    const double x = static_cast<double>(s) / (samples - 1);
    const double y = sum - x;
    if (y >= 0.0 && y <= 1.0) line.emplace_back(x, y);
    if (x > 0.0) {
      const double h = product / x;
      if (h <= 1.0) hyperbola.emplace_back(x, h);
    }
  }
  std::string warning;
  try {
    hits = binary_fiber_solve(z, c1, c2).points;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoRealSolution) {
      warning = "no real intersection";
    } else if (e.code() == ErrorCode::OutOfUnitBox) {
      warning = "intersection outside the unit square";
    } else {
      throw;
    }
  }

  if (format == "json") {
    auto pts = [](const std::vector<std::pair<double, double>>& v) {
      Json a = Json::array();
      for (auto [x, y] : v) a.push_back({x, y});
      return a;
    };
    Json j;
    j["z"] = z;
    j["c1"] = c1;
    j["c2"] = c2;
    j["line"] = pts(line);
    j["hyperbola"] = pts(hyperbola);
    j["intersections"] = pts(hits);
    j["warning"] = warning.empty() ? Json(nullptr) : Json(warning);
    return dump(j);
  }
  std::ostringstream os;
  os << "# z = delta(1,1)delta(2,2)/(delta(1,2)delta(2,1)); a table quoted with the reciprocal convention needs 1/z\n";
  os << "# x = lambda(1,1), y = lambda(2,2), c1 = lambda(2,1), c2 = lambda(1,2)\n";
  os << "curve,x,y,note\n";
  for (auto [x, y] : line) os << "line," << io::format_double(x) << "," << io::format_double(y) << ",\n";
  for (auto [x, y] : hyperbola) os << "hyperbola," << io::format_double(x) << "," << io::format_double(y) << ",\n";
  for (auto [x, y] : hits) os << "intersection," << io::format_double(x) << "," << io::format_double(y) << ",\n";
  if (!warning.empty()) os << "warning,,," << warning << "\n";
  return os.str();
}

// ---- fiber / vertices -------------------------------------------------------

ChainParams load_model(const std::string& path) {
  return io::model_from_json(io::parse_json(io::read_file(path), path));
}

std::string cmd_fiber(const std::string& path, std::size_t n, std::uint64_t seed) {
  const ChainParams params = load_model(path);
  const FiberSample sample = sample_fiber(params, n, seed);
  const MarginalTable base = marginal_13(params);
  double deviation = 0.0;
  Json points = Json::array();
  for (const auto& p : sample.points) {
    deviation = std::max(deviation, (marginal_13(p).cells() - base.cells()).cwiseAbs().maxCoeff());
    points.push_back(io::model_to_json(p));
  }
  Json j;
  j["n"] = n;
  j["seed"] = seed;
  j["accepted"] = sample.points.size();
  j["proposals"] = sample.proposals;
  j["stalled"] = sample.stalled;
  j["max_marginal_deviation"] = deviation;
  j["points"] = std::move(points);
  return dump(j);
}

std::string cmd_vertices(const std::string& path) {
  const ChainParams params = load_model(path);
  const RhoPiBounds bounds = rho_pi_bounds(params);
  Json j;
  j["rho_max"] = bounds.rho_max;
  j["pi_min"] = bounds.pi_min;
  j["rho_row"] = bounds.rho_index + 1;
  j["pi_row"] = bounds.pi_index + 1;
  Json list = Json::array();
  for (const auto& v : extreme_mixings(params)) {
    Json e;
    e["side"] = v.side == MixingSide::Y1Side ? "Y1" : "Y3";
    e["branch"] = v.branch == MixingBranch::PiAboveRho ? "pi>rho" : "pi<rho";
    e["pi"] = v.pi;
    e["rho"] = v.rho;
    e["q"] = io::matrix_to_json(v.q.q());
    e["zero_in_each_a_column"] = v.zero_in_each_a_column;
    e["zero_in_each_b_row"] = v.zero_in_each_b_row;
    e["params"] = io::model_to_json(apply_mixing(params, v.q));
    list.push_back(std::move(e));
  }
  j["vertices"] = std::move(list);
  return dump(j);
}

// ---- consistency ----------------------------------------------------------

std::string cmd_consistency(const std::string& counts_path, const std::string& marginal_path, int r2,
                            const ConsistencyOptions& options) {
  std::optional<MarginalTable> target;
  if (!counts_path.empty()) {
    const CountTable counts = io::counts_from_csv(io::read_file(counts_path), counts_path);
    target = MarginalTable(counts.as_weights() / static_cast<double>(counts.total()));
  } else {
    target = io::marginal_from_json(io::parse_json(io::read_file(marginal_path), marginal_path));
  }
  const ConsistencyReport report = consistency_check(*target, r2, options);
  Json j;
  j["r2"] = r2;
  j["feasible"] = report.feasible;
  j["proven_by"] = report.proven_by == Proof::None ? Json(nullptr) : Json(to_string(report.proven_by));
  j["best_divergence"] = report.best_divergence;
  Json checks;
  for (const auto& [name, ok] : report.necessary_checks) checks[name] = ok;
  j["necessary_checks"] = std::move(checks);
  j["restarts_run"] = report.restarts_run;
  j["seed"] = options.seed;
  j["witness"] = report.witness ? io::model_to_json(*report.witness) : Json(nullptr);
  return dump(j);
}

// ---- profile --------------------------------------------------------------

std::string cmd_profile(const std::string& counts_path, const std::string& model_path, int vertex,
                        const std::string& q_path, int steps, const std::string& format) {
  const ChainParams params = load_model(model_path);
  const CountTable counts =
      io::counts_from_csv(io::read_file(counts_path), counts_path, params.shape().r1(), params.shape().r3());
  std::optional<MixingMatrix> q;
  if (!q_path.empty()) {
    q = io::mixing_from_json(io::parse_json(io::read_file(q_path), q_path));
  } else {
    const auto vertices = extreme_mixings(params);
    if (vertex < 0 || vertex >= static_cast<int>(vertices.size()))
      throw CLI::ValidationError("--vertex", "index out of range (0.." + std::to_string(vertices.size() - 1) + ")");
    q = vertices[static_cast<std::size_t>(vertex)].q;
  }
  const ProfileTrace trace = profile_along_fiber(counts, params, *q, steps);

  if (format == "json") {
    Json j;
    Json rows = Json::array();
    for (const auto& p : trace.points) rows.push_back({{"t", p.t}, {"loglik", p.loglik}, {"min_entry", p.min_entry}});
    j["points"] = std::move(rows);
    j["q_end"] = io::matrix_to_json(q->q());
    j["exit_t"] = trace.exit_t ? Json(*trace.exit_t) : Json(nullptr);
    return dump(j);
  }
  std::ostringstream os;
  os << "t,loglik,min_entry\n";
  for (const auto& p : trace.points)
    os << io::format_double(p.t) << "," << io::format_double(p.loglik) << "," << io::format_double(p.min_entry)
       << "\n";
  if (trace.exit_t) os << "exit," << io::format_double(*trace.exit_t) << ",\n";
  return os.str();
}

// ---- emfit ----------------------------------------------------------------

std::string cmd_emfit(const std::string& counts_path, const std::vector<int>& shape_args, std::uint64_t seed,
                      const EmOptions& options, const std::string& model_out) {
  const Shape shape(shape_args.at(0), shape_args.at(1), shape_args.at(2));
  const CountTable counts = io::counts_from_csv(io::read_file(counts_path), counts_path, shape.r1(), shape.r3());
  const EmFit fit = em_fit(counts, shape, seed, options);
  const MarginalTable empirical(counts.as_weights() / static_cast<double>(counts.total()));

  Json j;
  j["shape"] = {shape.r1(), shape.r2(), shape.r3()};
  j["seed"] = seed;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["monotone"] = fit.monotone;
  j["restarts"] = fit.restarts;
  j["loglik"] = fit.loglik;
  j["empirical_kl"] = kl_divergence(empirical, fit.params);
  j["fitted_marginal"] = io::matrix_to_json(marginal_13(fit.params).cells());
  j["model"] = io::model_to_json(fit.params);
  if (!model_out.empty()) {
    std::ofstream f(model_out, std::ios::binary);
    if (!f) throw io::InputError("cannot write " + model_out);
    f << dump(io::model_to_json(fit.params));
  }
  return dump(j);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parameter-space geometry of the latent chain Y1 -> Y2 -> Y3 with Y2 hidden", "lcgeom"};
  app.require_subcommand(1, 1);
  Common common;
  std::uint64_t seed = 0;
  std::vector<int> ref_cell{1, 1};

  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--output,-o", common.output, "Write the result to this file instead of stdout");
  };
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", common.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  };

  std::function<std::string()> action;

  std::vector<int> dims_shape;
  auto* dims_cmd = app.add_subcommand("dims", "Model, margin and fiber dimensions for r1 r2 r3");
  dims_cmd->add_option("shape", dims_shape, "r1 r2 r3")->required()->expected(3);
  add_output(dims_cmd);
  dims_cmd->callback([&] { action = [&] { return cmd_dims(dims_shape); }; });

  std::string check_path;
  auto* check_cmd = app.add_subcommand("check", "Quadric residuals, lambda split and cross-ratios of a table");
  check_cmd->add_option("file", check_path, "model, joint or marginal JSON")->required();
  check_cmd->add_option("--ref-cell", ref_cell, "Reference state I K (1-based)")->expected(2);
  add_output(check_cmd);
  check_cmd->callback([&] { action = [&] { return cmd_check(check_path, ref_cell); }; });

  double z = 0.0, c1 = 0.0, c2 = 0.0;
  int samples = 101;
  auto* fig3_cmd = app.add_subcommand("fig3", "Line, hyperbola and intersections of the binary fiber system");
  fig3_cmd->add_option("--z", z, "Cross-ratio of the 2x2 margin")->required();
  fig3_cmd->add_option("--c1", c1, "lambda(2,1)")->required();
  fig3_cmd->add_option("--c2", c2, "lambda(1,2)")->required();
  fig3_cmd->add_option("--samples", samples, "Grid points per curve");
  add_output(fig3_cmd);
  add_format(fig3_cmd);
  fig3_cmd->callback([&] { action = [&] { return cmd_fig3(z, c1, c2, samples, common.format); }; });

  std::string model_path;
  std::size_t fiber_n = 10;
  auto* fiber_cmd = app.add_subcommand("fiber", "Sample parameter points sharing the model's (Y1,Y3) margin");
  fiber_cmd->add_option("model", model_path, "model JSON")->required();
  fiber_cmd->add_option("--n", fiber_n, "Number of points");
  fiber_cmd->add_option("--seed", seed, "RNG seed");
  add_output(fiber_cmd);
  fiber_cmd->callback([&] { action = [&] { return cmd_fiber(model_path, fiber_n, seed); }; });

  auto* vert_cmd = app.add_subcommand("vertices", "Extreme mixing matrices of an r2 = 2 model");
  vert_cmd->add_option("model", model_path, "model JSON")->required();
  add_output(vert_cmd);
  vert_cmd->callback([&] { action = [&] { return cmd_vertices(model_path); }; });

  std::string counts_path, marginal_path;
  int r2 = 0;
  ConsistencyOptions consistency;
  auto* cons_cmd = app.add_subcommand("consistency", "Can the observed table come from a model with r2 states?");
  auto* counts_opt = cons_cmd->add_option("--counts", counts_path, "counts CSV");
  auto* marg_opt = cons_cmd->add_option("--marginal", marginal_path, "marginal JSON");
  counts_opt->excludes(marg_opt);
  cons_cmd->add_option("--r2", r2, "Latent states")->required();
  cons_cmd->add_option("--restarts", consistency.restarts, "EM restarts");
  cons_cmd->add_option("--max-iter", consistency.max_iter, "EM iterations per restart");
  cons_cmd->add_option("--tol", consistency.tol, "KL threshold for feasibility");
  cons_cmd->add_option("--seed", consistency.seed, "RNG seed");
  add_output(cons_cmd);
  cons_cmd->callback([&] {
    if (counts_path.empty() == marginal_path.empty())
      throw CLI::ValidationError("consistency", "give exactly one of --counts or --marginal");
    action = [&] { return cmd_consistency(counts_path, marginal_path, r2, consistency); };
  });

  std::string q_path;
  int vertex = -1;
  int steps = 11;
  auto* prof_cmd = app.add_subcommand("profile", "Log-likelihood along a straight path of mixing matrices");
  prof_cmd->add_option("--counts", counts_path, "counts CSV")->required();
  prof_cmd->add_option("--model", model_path, "model JSON")->required();
  auto* vertex_opt = prof_cmd->add_option("--vertex", vertex, "End at this entry of the vertices list (0-based)");
  auto* q_opt = prof_cmd->add_option("--q", q_path, "End at the mixing matrix in this JSON file");
  vertex_opt->excludes(q_opt);
  prof_cmd->add_option("--steps", steps, "Grid points on t in [0,1]");
  add_output(prof_cmd);
  add_format(prof_cmd);
  prof_cmd->callback([&] {
    if ((vertex < 0) == q_path.empty()) throw CLI::ValidationError("profile", "give exactly one of --vertex or --q");
    action = [&] { return cmd_profile(counts_path, model_path, vertex, q_path, steps, common.format); };
  });

  std::vector<int> em_shape;
  EmOptions em;
  std::string model_out;
  auto* em_cmd = app.add_subcommand("emfit", "Fit the latent chain to counts by EM");
  em_cmd->add_option("--counts", counts_path, "counts CSV")->required();
  em_cmd->add_option("--shape", em_shape, "r1 r2 r3")->required()->expected(3);
  em_cmd->add_option("--seed", seed, "RNG seed");
  em_cmd->add_option("--max-iter", em.max_iter, "Iteration cap");
  em_cmd->add_option("--tol", em.tol, "Per-observation log-likelihood gain threshold");
  em_cmd->add_option("--model-out", model_out, "Also write the fitted model JSON here");
  add_output(em_cmd);
  em_cmd->callback([&] { action = [&] { return cmd_emfit(counts_path, em_shape, seed, em, model_out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::string result;
  try {
    result = action();
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const io::InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const Error& e) {
    // Argument-level failures (bad shapes) are usage errors; anything that
    // rejects file content is an input error.
    const bool usage = e.code() == ErrorCode::InvalidArgument && (dims_cmd->parsed() || em_cmd->parsed());
    err << (usage ? "usage error: " : "input error: ") << e.what() << "\n";
    return usage ? kExitUsage : kExitBadInput;
  }

  if (!common.output.empty()) {
    std::ofstream f(common.output, std::ios::binary);
    if (!f) {
      err << "input error: cannot write " << common.output << "\n";
      return kExitBadInput;
    }
    f << result;
  } else {
    out << result;
  }
  return kExitOk;
}

}  // namespace lcgeom::cli
