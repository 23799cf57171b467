#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "pechukas/ensemble.hpp"

using namespace pechukas;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

CampaignSpec small_campaign(int dim = 8, int realizations = 6) {
  CampaignSpec s;
  s.ensemble.dim = dim;
  s.realizations = realizations;
  s.sweep_times = {10.0, 40.0, 160.0, 640.0};
  s.seed = 77;
  return s;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pechukas_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

bool same(const EnsembleStatistics& a, const EnsembleStatistics& b) {
  if (a.realizations_completed != b.realizations_completed) return false;
  if (!(a.survival_mean.array() == b.survival_mean.array()).all()) return false;
  if (!(a.survival_stderr.array() == b.survival_stderr.array()).all()) return false;
  if (!(a.deviation_mean.array() == b.deviation_mean.array()).all()) return false;
  if (!(a.crossing_counts.array() == b.crossing_counts.array()).all()) return false;
  for (const auto& [n0, m] : a.final_distribution)
    if (!(m.array() == b.final_distribution.at(n0).array()).all()) return false;
  return true;
}

}  // namespace

TEST_CASE("fit_power_law on exact power laws") {
  std::vector<std::pair<double, double>> sqrt_pts, quarter_pts;
  for (double t : {10.0, 20.0, 50.0, 100.0, 400.0}) {
    sqrt_pts.emplace_back(t, std::sqrt(t));
    quarter_pts.emplace_back(t, 3.0 * std::pow(t, 0.25));
  }
  const ScalingFit a = fit_power_law(sqrt_pts);
  CHECK_THAT(a.gamma, WithinAbs(0.5, 1e-12));
  CHECK_THAT(a.amplitude, WithinRel(1.0, 1e-12));
  CHECK(a.residual < 1e-12);
  CHECK(a.points == 5);

  const ScalingFit b = fit_power_law(quarter_pts);
  CHECK_THAT(b.gamma, WithinAbs(0.25, 1e-12));
  CHECK_THAT(b.amplitude, WithinRel(3.0, 1e-12));
}

TEST_CASE("fit_power_law window and errors") {
  std::vector<std::pair<double, double>> pts{{1, 1}, {2, 2}, {4, 4}, {8, 8}, {16, 0.0}};
  const ScalingFit f = fit_power_law(pts, 1, 8);
  CHECK_THAT(f.gamma, WithinAbs(1.0, 1e-12));
  CHECK(f.window_lo == 1);
  CHECK(f.window_hi == 8);
  CHECK_THROWS_WITH(fit_power_law(pts, 1, 16), ContainsSubstring("non-positive value"));
  CHECK_THROWS_WITH(fit_power_law(pts, 2, 8), ContainsSubstring("at least 4 points"));

  std::vector<std::pair<double, double>> noisy{{1, 1.1}, {2, 1.9}, {4, 4.2}, {8, 7.7}, {16, 16.5}};
  const ScalingFit g = fit_power_law(noisy);
  CHECK(g.residual > 0.0);
  CHECK(g.gamma_stderr > 0.0);
}

TEST_CASE("spacing normalization") {
  const ProblemDefinition p = sample_ensemble({6, EnsembleKind::GUE, 0.4, BiasKind::PicketFence, 3});
  const double spacing = mean_level_spacing(eigenvalues(p.h0));

  const NormalizedProblem same = apply_spacing_normalization(p, {1.0 / spacing, 1.0});
  CHECK_THAT(same.factor, WithinRel(1.0, 1e-14));

  const NormalizedProblem half = apply_spacing_normalization(p, {2.0 / spacing, 1.0});
  CHECK_THAT(half.factor, WithinRel(0.5, 1e-14));
  CHECK((half.problem.h0.entries() - 0.5 * p.h0.entries()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THAT(half.problem.z, WithinRel(0.5 * p.z, 1e-14));
  CHECK((half.problem.hb.entries().array() == p.hb.entries().array()).all());

  const SweepSpec sweep{37.0, 0.7};
  const NormalizedProblem n = apply_spacing_normalization(p, sweep);
  CHECK_THAT(mean_level_spacing(eigenvalues(n.problem.h0)), WithinRel(sweep.hbar / sweep.total_time, 1e-12));
  CHECK(n.problem.hbar == 0.7);

  ProblemDefinition flat = p;
  flat.h0 = HermitianMatrix::from_real(Eigen::MatrixXd::Identity(6, 6));
  CHECK_THROWS_AS(apply_spacing_normalization(flat, sweep), ValidationError);
}

TEST_CASE("campaign spec validation and defaults") {
  CampaignSpec s;
  CHECK(s.resolved_tracked_levels() == std::vector<int>{1, 2, 5, 10, 25, 41, 46, 49, 50});
  CHECK(s.sweep_times.size() == 7);
  CHECK_THAT(1.0 / s.sweep_times.front(), WithinRel(1e-3, 1e-12));
  CHECK_THAT(s.resolved_count_reference_time(), WithinRel(100.0, 1e-12));
  CHECK_NOTHROW(s.validate());

  CampaignSpec bad = s;
  bad.realizations = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.sweep_times = {10.0, -1.0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.tracked_levels = {51};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK(realization_seed(1, 2) != realization_seed(2, 1));
  CHECK(realization_seed(1, 2) == realization_seed(1, 2));
}

TEST_CASE("one realization reproduces the single-run transitions result") {
  CampaignSpec spec = small_campaign(8, 1);
  spec.tracked_levels = {1, 4, 8};
  const EnsembleStatistics st = run_campaign(spec);
  REQUIRE(st.realizations_completed == 1);

  const NormalizedProblem np = campaign_problem(spec, 0);
  const Trajectory t = integrate(np.problem, initial_conditions_exact(np.problem), spec.integrator);
  const DetectionReport det = detect_anticrossings(t);
  for (std::size_t i = 0; i < spec.sweep_times.size(); ++i) {
    std::vector<AnticrossingEvent> events = det.events;
    assign_probabilities(events, {spec.sweep_times[i], spec.hbar});
    const OccupationMatrix occ = propagate_occupations(events, 8);
    for (int n = 0; n < 8; ++n) {
      CHECK(st.survival_mean(i, n) == occ(n, n));
      CHECK(st.deviation_mean(i, n) == occ.mean_square_deviation(n));
      CHECK(st.survival_stderr(i, n) == 0.0);
    }
    for (int n0 : spec.tracked_levels)
      CHECK((st.final_distribution.at(n0).row(i).transpose() - occ.p.col(n0 - 1)).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(st.normalization_factors.front() == np.factor);
}

TEST_CASE("one integration serves every sweep time") {
  CampaignSpec spec = small_campaign(6, 1);
  const RealizationResult all = run_realization(spec, 0);
  REQUIRE(all.ok);
  for (std::size_t i = 0; i < spec.sweep_times.size(); ++i) {
    CampaignSpec one = spec;
    one.sweep_times = {spec.sweep_times[i]};
    const RealizationResult r = run_realization(one, 0);
    CHECK((r.survival.row(0).array() == all.survival.row(i).array()).all());
    CHECK((r.msd.row(0).array() == all.msd.row(i).array()).all());
  }
}

TEST_CASE("campaigns are deterministic across worker counts") {
  CampaignSpec spec = small_campaign(8, 8);
  spec.workers = 1;
  const EnsembleStatistics a = run_campaign(spec);
  spec.workers = 3;
  const EnsembleStatistics b = run_campaign(spec);
  CHECK(same(a, b));
  CHECK(a.realizations_completed == 8);
  CHECK(a.max_momentum_drift < 1e-8);
  CHECK(a.max_energy_drift < 1e-8);
  CHECK(a.survival_mean.minCoeff() >= 0.0);
  CHECK(a.survival_mean.maxCoeff() <= 1.0 + 1e-12);
  CHECK(a.deviation_mean.minCoeff() >= 0.0);

  spec.seed = 78;
  CHECK_FALSE(same(a, run_campaign(spec)));
}

TEST_CASE("campaigns resume from checkpoints") {
  const auto dir = fresh_dir("resume");
  CampaignSpec spec = small_campaign(8, 6);
  const EnsembleStatistics reference = run_campaign(spec);

  spec.checkpoint_dir = dir.string();
  CampaignSpec partial = spec;
  partial.realizations = 3;  // interrupted after three realizations
  run_campaign(partial);
  REQUIRE(std::distance(std::filesystem::directory_iterator(dir), {}) == 3);

  const EnsembleStatistics resumed = run_campaign(spec);
  CHECK(resumed.realizations_resumed == 3);
  CHECK(same(reference, resumed));

  // a truncated file is recomputed
  {
    std::ofstream out(dir / "realization_000000.json");
    out << "{\"fingerprint\":";
  }
  const EnsembleStatistics again = run_campaign(spec);
  CHECK(again.realizations_resumed == 5);
  CHECK(same(reference, again));

  // checkpoints from a different configuration are ignored
  CampaignSpec other = spec;
  other.seed = 1;
  CHECK(run_campaign(other).realizations_resumed == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint round trip preserves results bit for bit") {
  CampaignSpec spec = small_campaign(6, 1);
  const RealizationResult r = run_realization(spec, 2);
  const RealizationResult back = realization_from_json(to_json(r));
  CHECK(back.index == r.index);
  CHECK(back.seed == r.seed);
  CHECK(back.ok == r.ok);
  CHECK((back.survival.array() == r.survival.array()).all());
  CHECK((back.msd.array() == r.msd.array()).all());
  CHECK((back.crossings.array() == r.crossings.array()).all());
  CHECK(back.normalization_factor == r.normalization_factor);
}

TEST_CASE("failed realizations are skipped until the failure budget runs out") {
  CampaignSpec spec = small_campaign(6, 20);
  std::vector<RealizationResult> results;
  for (int i = 0; i < 20; ++i) results.push_back(run_realization(spec, i));
  results[4].ok = false;
  results[4].error = "integrate: step size below min_step";
  const EnsembleStatistics st = aggregate(spec, results);
  CHECK(st.realizations_completed == 19);
  CHECK(st.realizations_failed == 1);
  REQUIRE(st.warnings.size() == 1);
  CHECK_THAT(st.warnings.front(), ContainsSubstring("realization 4"));

  CampaignSpec doomed = small_campaign(6, 4);
  doomed.integrator.max_step = 0.5;
  doomed.integrator.min_step = 0.4;  // no realization can resolve its anticrossings
  CHECK_THROWS_WITH(run_campaign(doomed), ContainsSubstring("realizations failed"));
}

TEST_CASE("crossing counts follow the threshold rule") {
  CampaignSpec spec = small_campaign(8, 1);
  const RealizationResult r = run_realization(spec, 0);
  const NormalizedProblem np = campaign_problem(spec, 0);
  const Trajectory t = integrate(np.problem, initial_conditions_exact(np.problem), spec.integrator);
  auto events = detect_anticrossings(t).events;
  assign_probabilities(events, {spec.resolved_count_reference_time(), spec.hbar});
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(8);
  for (const auto& e : events)
    if (e.p_lz > spec.count_threshold) {
      counts(e.lower_level) += 1;
      counts(e.lower_level + 1) += 1;
    }
  CHECK((counts.array() == r.crossings.array()).all());
}

TEST_CASE("saturation window selection") {
  const std::vector<std::pair<double, double>> series{{10, 0.2}, {20, 0.4}, {40, 0.7}, {80, 0.85}, {160, 0.95}};
  const auto w = unsaturated_window(series, 0.9);
  REQUIRE(w);
  CHECK(w->first == 10);
  CHECK(w->second == 80);
  CHECK_FALSE(unsaturated_window({{10, 0.95}, {20, 0.99}}, 0.9));
}
