// Command-line front end. Exit codes: 0 success, 1 usage or input error,
// 2 when a grid finished with failed trials (results are still written).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "dpgm/cgm.hpp"
#include "dpgm/experiments.hpp"
#include "dpgm/io.hpp"
#include "dpgm/likelihood.hpp"
#include "dpgm/mobility.hpp"
#include "dpgm/naive.hpp"
#include "dpgm/privacy.hpp"
#include "dpgm/sampling.hpp"

using namespace dpgm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

JunctionTree require_tree(const ModelStructure& st, const std::string& what) {
  auto jt = build_junction_tree(st);
  if (!jt) throw UsageError(what + " needs a decomposable structure");
  return *jt;
}

std::filesystem::path sidecar_path(const std::filesystem::path& out) {
  auto p = out;
  p.replace_extension(".spec.json");
  return p;
}

void write_metric_csv(const std::string& path, const std::string& metric, double value) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "metric,value\n" << metric << ',' << format_double(value) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning discrete graphical models from Laplace-perturbed clique statistics"};
  app.require_subcommand(1);

  // gen-model
  auto* gen = app.add_subcommand("gen-model", "Random structure and Dirichlet potentials");
  std::string g_kind = "chain", g_out;
  int g_T = 5, g_card = 3, g_order = 1;
  double g_p = 0.3;
  std::uint64_t g_seed = 1;
  gen->add_option("--kind", g_kind, "chain or er")->check(CLI::IsMember({"chain", "er"}));
  gen->add_option("--T", g_T, "number of variables");
  gen->add_option("--cardinality", g_card, "states per variable");
  gen->add_option("--order", g_order, "chain order");
  gen->add_option("--edge-prob", g_p, "ER edge probability");
  gen->add_option("--seed", g_seed);
  gen->add_option("--out", g_out, "model JSON")->required();

  // sample
  auto* samp = app.add_subcommand("sample", "Exact samples from a decomposable model");
  std::string s_model, s_out;
  std::size_t s_n = 1000;
  std::uint64_t s_seed = 1;
  samp->add_option("--model", s_model)->required();
  samp->add_option("--n", s_n, "number of records");
  samp->add_option("--seed", s_seed);
  samp->add_option("--out", s_out, "dataset CSV")->required();

  // perturb
  auto* pert = app.add_subcommand("perturb", "Laplace release of a dataset's clique tables");
  std::string p_model, p_data, p_out;
  double p_eps = 1.0, p_cap = 1.0;
  std::uint64_t p_seed = 1;
  pert->add_option("--model", p_model, "model JSON supplying the structure")->required();
  pert->add_option("--data", p_data)->required();
  pert->add_option("--epsilon", p_eps)->required();
  pert->add_option("--seed", p_seed);
  pert->add_option("--weight-cap", p_cap, "largest allowed record weight");
  pert->add_option("--out", p_out, "release JSON")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit parameters from data or a release");
  std::string f_est = "cgm", f_model, f_data, f_release, f_out, f_trace, f_bp_dump;
  double f_lambda = -1.0, f_eps = 0.0;
  std::optional<double> f_N;
  std::uint64_t f_seed = 1;
  bool f_no_projection = false;
  fit->add_option("--estimator", f_est)->check(CLI::IsMember({"naive", "naive-projected", "cgm", "nonprivate"}));
  fit->add_option("--model", f_model, "model JSON supplying the structure");
  fit->add_option("--data", f_data, "dataset CSV (nonprivate, or perturbed here with --epsilon)");
  fit->add_option("--release", f_release, "release JSON");
  fit->add_option("--N", f_N, "public population size (default: dataset size)");
  fit->add_option("--lambda", f_lambda, "L2 weight (default 1e-3, 1e-6 for the EM M-step)");
  fit->add_option("--epsilon", f_eps, "privacy budget when perturbing --data");
  fit->add_option("--seed", f_seed, "noise seed when perturbing --data");
  fit->add_flag("--no-projection", f_no_projection, "naive: fit the raw noisy tables");
  fit->add_option("--trace", f_trace, "cgm: write the per-iteration EM trace CSV");
  fit->add_option("--bp-dump", f_bp_dump, "write BP marginals of the fitted model as JSON");
  fit->add_option("--out", f_out, "fit JSON")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Score a fit");
  std::string e_metric = "kl", e_fit, e_truth, e_data, e_out;
  ev->add_option("--metric", e_metric)->check(CLI::IsMember({"kl", "mse", "holdout-ll"}));
  ev->add_option("--fit", e_fit)->required();
  ev->add_option("--truth", e_truth, "true model JSON (kl, mse)");
  ev->add_option("--data", e_data, "test dataset CSV (holdout-ll)");
  ev->add_option("--out", e_out, "metric CSV")->required();

  // grid
  auto* grid = app.add_subcommand("grid", "Run an experiment spec");
  std::string r_spec, r_out, r_timing, r_kind = "trials";
  std::vector<double> r_lambdas{1e-8, 1e-6, 1e-4, 1e-2, 1, 10};
  int r_threads = 0;
  grid->add_option("--spec", r_spec)->required();
  grid->add_option("--out", r_out, "result CSV")->required();
  grid->add_option("--timing", r_timing, "wall-time CSV");
  grid->add_option("--experiment", r_kind)->check(CLI::IsMember({"trials", "mse", "lambda-sweep"}));
  grid->add_option("--lambdas", r_lambdas, "lambda grid for lambda-sweep");
  grid->add_option("--threads", r_threads, "override the spec's thread count");

  // gen-mobility
  auto* genm = app.add_subcommand("gen-mobility", "Synthetic event log from a planted chain");
  MobilityConfig m_cfg;
  std::string m_out;
  genm->add_option("--users", m_cfg.num_users);
  genm->add_option("--days", m_cfg.days_per_user);
  genm->add_option("--locations", m_cfg.num_locations);
  genm->add_option("--seed", m_cfg.seed);
  genm->add_option("--out", m_out, "event CSV")->required();

  // ingest-mobility
  auto* ing = app.add_subcommand("ingest-mobility", "Event log to weighted segment dataset");
  std::string i_events, i_out, i_model;
  int i_locations = 20, i_interval = 10, i_hours = 1;
  ing->add_option("--events", i_events)->required();
  ing->add_option("--locations", i_locations)->required();
  ing->add_option("--interval-minutes", i_interval);
  ing->add_option("--segment-hours", i_hours);
  ing->add_option("--out", i_out, "dataset CSV")->required();
  ing->add_option("--model-out", i_model, "write the tied chain structure (zero theta) as model JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      Rng rng(g_seed);
      const ModelKind kind = model_kind_from_string(g_kind);
      StructurePtr st = gen_structure(kind, g_T, g_card, g_order, g_p, rng);
      write_json(g_out, model_to_json({st, gen_potentials(st, rng)}));
    } else if (*samp) {
      const Model m = model_from_json(read_json(s_model));
      Rng rng(s_seed);
      write_dataset_csv(s_out, sample(m.theta, s_n, require_tree(*m.structure, "sample"), rng));
    } else if (*pert) {
      const Model m = model_from_json(read_json(p_model));
      const Dataset data = read_dataset_csv(p_data);
      check_weight_cap(data, p_cap);
      write_json(p_out, release_to_json(perturb(sufficient_statistics(data, m.structure), PrivacyBudget(p_eps), p_seed, p_cap)));
    } else if (*fit) {
      StructurePtr st;
      std::optional<PrivateRelease> release;
      std::optional<CliqueTableSet> stats;
      if (!f_release.empty()) {
        release = release_from_json(read_json(f_release));
        st = release->y.structure_ptr();
      } else {
        if (f_model.empty() || f_data.empty()) throw UsageError("fit needs --release, or --model with --data");
        st = model_from_json(read_json(f_model)).structure;
        const Dataset data = read_dataset_csv(f_data);
        stats = sufficient_statistics(data, st);
        if (!f_N) f_N = data.total_weight();
        if (f_est != "nonprivate") {
          if (!(f_eps > 0.0)) throw UsageError("private estimators on --data need --epsilon");
          release = perturb(*stats, PrivacyBudget(f_eps), f_seed);
        }
      }
      if (f_est == "nonprivate" && !stats) throw UsageError("nonprivate needs --model and --data");
      if (!f_N) throw UsageError("--N is required when fitting a release");
      const auto engine = make_engine(st);
      std::optional<FitResult> result;
      if (f_est == "cgm") {
        EMConfig cfg;
        if (f_lambda >= 0.0) cfg.fit.lambda = f_lambda;
        const EMResult em = em_fit(*release, *f_N, *engine, cfg);
        result = em.fit;
        if (!f_trace.empty()) {
          std::ofstream out(f_trace);
          if (!out) throw IoError("cannot write " + f_trace);
          out << "iteration,estep_objective,estep_residual,estep_iterations,estep_converged,theta_change\n";
          for (std::size_t t = 0; t < em.trace.size(); ++t) {
            const auto& it = em.trace[t];
            out << t << ',' << format_double(it.estep_objective) << ',' << format_double(it.estep_residual) << ','
                << it.estep_iterations << ',' << (it.estep_converged ? 1 : 0) << ',' << format_double(it.theta_change)
                << '\n';
          }
        }
      } else {
        FitConfig cfg;
        if (f_lambda >= 0.0) cfg.lambda = f_lambda;
        FitOptions opts;
        if (f_est == "nonprivate") {
          opts.total = *f_N;
          result = fit_mle(*stats, *engine, cfg, opts);
        } else if (f_est == "naive" && f_no_projection) {
          opts.total = *f_N;
          result = fit_mle(release->y, *engine, cfg, opts);
        } else {
          opts.total = 1.0;
          result = fit_mle(project_release(*release, *f_N), *engine, cfg, opts);
        }
      }
      write_json(f_out, fit_to_json(*result));
      if (!f_bp_dump.empty()) write_json(f_bp_dump, bp_to_json(engine->run(result->theta_hat)));
      for (const auto& w : result->warnings) std::cerr << "warning: " << w << '\n';
    } else if (*ev) {
      const Model fitted = model_from_json(read_json(e_fit));
      double value = 0.0;
      if (e_metric == "holdout-ll") {
        if (e_data.empty()) throw UsageError("holdout-ll needs --data");
        const auto engine = make_engine(fitted.structure);
        value = mean_log_likelihood(read_dataset_csv(e_data), fitted.theta, engine->run(fitted.theta).log_partition);
      } else {
        if (e_truth.empty()) throw UsageError(e_metric + " needs --truth");
        const Model truth = model_from_json(read_json(e_truth));
        if (!(*truth.structure == *fitted.structure)) throw UsageError("fit and truth structures differ");
        const auto engine = make_engine(truth.structure, require_tree(*truth.structure, e_metric));
        if (e_metric == "kl") {
          value = kl_divergence(truth.theta, fitted.theta, *engine);
        } else {
          const BPResult a = engine->run(truth.theta), b = engine->run(fitted.theta);
          for (std::size_t i = 0; i < a.marginals.size(); ++i)
            value += (a.marginals[i] - b.marginals[i]) * (a.marginals[i] - b.marginals[i]);
          value /= static_cast<double>(a.marginals.size());
        }
      }
      write_metric_csv(e_out, e_metric, value);
    } else if (*grid) {
      ExperimentSpec spec = ExperimentSpec::from_json(read_json(r_spec));
      if (r_threads > 0) spec.threads = r_threads;
      write_json(sidecar_path(r_out), spec.to_json());
      if (r_kind == "mse") {
        write_mse_csv(r_out, marginal_mse_experiment(spec));
      } else if (r_kind == "lambda-sweep") {
        write_sweep_csv(r_out, lambda_sweep(spec, r_lambdas));
      } else {
        const GridResult result = run_grid(spec);
        write_trials_csv(r_out, result);
        if (!r_timing.empty()) write_timing_csv(r_timing, result);
        if (result.failures() > 0) {
          std::cerr << result.failures() << " trial(s) failed; see the status column\n";
          return 2;
        }
      }
    } else if (*genm) {
      write_events_csv(m_out, generate_mobility(m_cfg, planted_chain(m_cfg)));
    } else if (*ing) {
      const EventLog log = read_events_csv(i_events, i_locations);
      const MobilityData md = mobility_ingest(log.events, i_locations, i_interval, i_hours);
      write_dataset_csv(i_out, md.data);
      if (!i_model.empty()) {
        StructurePtr st = time_homogeneous_structure(md.segment_length, i_locations + 1);
        write_json(i_model, model_to_json({st, Parameters(st)}));
      }
      std::cerr << "records " << md.data.size() << ", contributing individuals " << md.contributing_individuals
                << ", skipped rows " << log.malformed_rows << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
