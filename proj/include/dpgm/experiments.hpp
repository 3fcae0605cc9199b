#pragma once

// Synthetic models, trial grids and the result tables behind the
// experiments. Every random quantity is drawn from a generator seeded by
// derive_seed(master_seed, ids), so any row can be recomputed on its own.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpgm/cgm.hpp"
#include "dpgm/io.hpp"
#include "dpgm/mobility.hpp"
#include "dpgm/model.hpp"
#include "dpgm/naive.hpp"

namespace dpgm {

enum class ModelKind { chain, er, time_homogeneous };
enum class Metric { kl, marginal_mse, holdout_ll };

const char* to_string(ModelKind kind);
const char* to_string(Metric metric);
ModelKind model_kind_from_string(const std::string& s);
Metric metric_from_string(const std::string& s);

// Estimator names: naive, naive-projected, cgm, nonprivate, random.
bool is_estimator(const std::string& name);

struct ExperimentSpec {
  std::string name = "experiment";
  ModelKind model_kind = ModelKind::chain;
  int T = 5;
  int cardinality = 5;
  int order = 1;                 // chain: edges between i, j with 1 <= |i - j| <= order
  double er_edge_prob = 0.3;
  // Tree cliques of a triangulation; makes KL exact for ER structures.
  std::vector<Scope> triangulation;
  std::vector<double> N_grid{1000};
  std::vector<double> epsilon_grid{1.0};
  int num_populations = 5;
  int num_replicates = 5;
  std::uint64_t master_seed = 1;
  std::vector<std::string> estimators{"naive-projected", "cgm"};
  Metric metric = Metric::kl;
  double lambda = 1e-3;          // naive, naive-projected, nonprivate and random fits
  double holdout_size = 10000;   // test records for holdout_ll on synthetic models
  EMConfig em;
  BPConfig bp;
  MobilityConfig mobility;       // time_homogeneous only; num_users is overridden by N
  int threads = 1;

  void validate() const;
  static ExperimentSpec from_json(const Json& j);
  Json to_json() const;
};

// Pairwise structures: order-k chain, or G(T, p) resampled until connected.
StructurePtr gen_structure(ModelKind kind, int T, int cardinality, int order, double edge_prob, Rng& rng);

// log of one flat-Dirichlet draw per clique table.
Parameters gen_potentials(const StructurePtr& structure, Rng& rng);

struct TrialResult {
  double N = 0.0;
  double epsilon = 0.0;
  int population = 0;
  int replicate = 0;
  std::string estimator;
  double value = 0.0;
  bool converged = true;
  std::string status = "ok";  // "ok" or the failure message
  double wall_time = 0.0;
};

struct GridResult {
  ExperimentSpec spec;
  std::vector<TrialResult> trials;  // canonical order: N, epsilon, population, replicate, estimator
  std::size_t failures() const;
};

// True model of a synthetic spec: structure and potentials from master_seed.
Model true_model(const ExperimentSpec& spec);

// Junction tree for exact metrics: the bundled triangulation, or the
// structure's own when decomposable.
std::optional<JunctionTree> exact_tree(const ExperimentSpec& spec, const ModelStructure& structure);

GridResult run_grid(const ExperimentSpec& spec);

// Fits one estimator on one release. `stats` are the true counts (used by
// nonprivate only); `seed` drives the random baseline.
FitResult fit_estimator(const std::string& estimator, const CliqueTableSet& stats, const PrivateRelease& release,
                        double N, const InferenceEngine& engine, const ExperimentSpec& spec, std::uint64_t seed,
                        const ParameterTying* tying = nullptr);

struct MseRow {
  double N, epsilon;
  double mse;        // mean over cells and trials of (y / N - mu)^2
  double std_error;  // of the per-trial cell averages
  double predicted;  // mean over cells of predicted_mse
};

struct MseResult {
  std::vector<MseRow> rows;
  // Least-squares slope of log mse on log N, one per epsilon.
  std::vector<std::pair<double, double>> slopes;
};

// Raw noisy marginals y / N against the true marginals. Uses
// num_populations * num_replicates trials per grid point, each with a fresh
// population.
MseResult marginal_mse_experiment(const ExperimentSpec& spec);

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct SweepRow {
  double lambda;
  std::string curve;  // "noisy" (naive-projected on y) or "true" (fit on n)
  double median_kl;
};

// Uses the first N and epsilon of the spec.
std::vector<SweepRow> lambda_sweep(const ExperimentSpec& spec, const std::vector<double>& lambdas);

struct ScatterRow {
  std::string estimator;
  std::string edge;
  std::size_t config;
  double true_mu;
  double fitted_mu;
};

std::vector<ScatterRow> scatter_dump(const Parameters& theta_true,
                                     const std::vector<std::pair<std::string, Parameters>>& fits,
                                     const InferenceEngine& engine);

// Holdout log-likelihood on synthetic mobility data: N_grid holds user
// counts, each population is a fresh generator seed, and 25% of the users
// are held out for testing.
GridResult mobility_experiment(const ExperimentSpec& spec);

// CSV writers. Result tables never contain timings; those go to a separate
// file so repeated runs produce identical result files.
void write_trials_csv(const std::filesystem::path& path, const GridResult& result);
void write_timing_csv(const std::filesystem::path& path, const GridResult& result);
void write_mse_csv(const std::filesystem::path& path, const MseResult& result);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterRow>& rows);

double median(std::vector<double> v);

}  // namespace dpgm
