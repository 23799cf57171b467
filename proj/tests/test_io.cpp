#include <catch_amalgamated.hpp>

#include <clocale>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pechukas/io.hpp"

using namespace pechukas;
using Catch::Matchers::ContainsSubstring;

namespace {

HermitianMatrix parse(const std::string& text) {
  std::istringstream in(text);
  return parse_matrix(in, "input");
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("matrix text parsing") {
  const HermitianMatrix m = parse("# a comment\n2\n1 0.5,-0.25\n0.5,0.25 -3\n");
  CHECK(m.dim() == 2);
  CHECK(m(0, 0) == cplx(1, 0));
  CHECK(m(0, 1) == cplx(0.5, -0.25));
  CHECK(m(1, 0) == cplx(0.5, 0.25));
  CHECK(m(1, 1) == cplx(-3, 0));
}

TEST_CASE("matrix parsing rejects bad input") {
  CHECK_THROWS_WITH(parse("2\n1 2\n3 4\n"), ContainsSubstring("not Hermitian"));
  CHECK_THROWS_WITH(parse("2\n1 2\n2\n"), ContainsSubstring("expected 4 entries, found 3"));
  CHECK_THROWS_WITH(parse("2\n1 0 0 1 5\n"), ContainsSubstring("trailing data"));
  CHECK_THROWS_WITH(parse("1\n1\n"), ContainsSubstring("dimension >= 2"));
  CHECK_THROWS_WITH(parse("2\n1 x 0 1\n"), ContainsSubstring("bad number 'x'"));
  CHECK_THROWS_WITH(parse("2\n1 0,1 0,1 1\n"), ContainsSubstring("not Hermitian"));
  CHECK_NOTHROW(parse("2\n1 0,1 0,-1 1\n"));
  CHECK_NOTHROW(parse("2\n1 1e-13 0 1\n"));  // within the Hermiticity tolerance
}

TEST_CASE("matrix files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pechukas_test_io";
  std::filesystem::create_directories(dir);
  const ProblemDefinition p = sample_ensemble({5, EnsembleKind::GUE, 0.7, BiasKind::RandomSameEnsemble, 8});
  write_matrix_file((dir / "h0.txt").string(), p.h0);
  const HermitianMatrix back = read_matrix_file((dir / "h0.txt").string());
  CHECK((back.entries().array() == p.h0.entries().array()).all());
  CHECK_THROWS_WITH(read_matrix_file((dir / "missing.txt").string()), ContainsSubstring("missing.txt"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("CSV output has headers and locale-independent numbers") {
  const auto dir = std::filesystem::temp_directory_path() / "pechukas_test_csv";
  std::filesystem::create_directories(dir);
  const char* previous = std::setlocale(LC_ALL, nullptr);
  const std::string saved = previous ? previous : "C";
  std::setlocale(LC_NUMERIC, "de_DE.UTF-8");  // harmless if the locale is absent
  std::locale::global(std::locale::classic());

  {
    CsvWriter w(dir / "t.csv", {"a", "b"});
    w.row(1.5, 2);
    w.row(std::vector<double>{0.1, -3e-20});
  }
  const auto l = lines(dir / "t.csv");
  REQUIRE(l.size() == 3);
  CHECK(l[0] == "a,b");
  CHECK(l[1] == "1.5,2");
  CHECK(l[2].find(';') == std::string::npos);
  CHECK(std::stod(l[2].substr(0, l[2].find(','))) == 0.1);  // 17 digits round-trip
  CHECK(std::stod(l[2].substr(l[2].find(',') + 1)) == -3e-20);

  const ProblemDefinition p = sample_ensemble({3, EnsembleKind::GUE, 0.2, BiasKind::PicketFence, 2});
  IntegratorConfig cfg;
  cfg.dense_output_points = 7;
  const Trajectory t = integrate(p, initial_conditions_exact(p), cfg);
  write_trajectory_csv(dir / "traj.csv", t);
  const auto tl = lines(dir / "traj.csv");
  CHECK(tl.front() == "lambda,x_1,x_2,x_3");
  CHECK(tl.size() == 8);
  CHECK(tl[1].rfind("1,", 0) == 0);
  CHECK(tl.back().rfind("0,", 0) == 0);

  std::vector<AnticrossingEvent> events(1);
  events[0].lower_level = 1;
  events[0].lambda_star = 0.25;
  write_events_csv(dir / "events.csv", events);
  const auto el = lines(dir / "events.csv");
  CHECK(el[0] == "pair,lambda_star,delta_min,coupling,p_lz");
  CHECK(el[1].rfind("2,0.25,", 0) == 0);

  write_occupation_csv(dir / "occ.csv", OccupationMatrix::identity(2));
  const auto ol = lines(dir / "occ.csv");
  CHECK(ol[0] == "final_level,initial_1,initial_2");
  CHECK(ol[1] == "1,1,0");
  CHECK(ol[2] == "2,0,1");

  std::setlocale(LC_ALL, saved.c_str());
  std::filesystem::remove_all(dir);
}

TEST_CASE("JSON summaries") {
  const nlohmann::json c = to_json(CampaignSpec{});
  CHECK(c["dim"] == 50);
  CHECK(c["normalization"] == "spacing");
  CHECK(c["tracked_levels"].size() == 9);
  CHECK(c["integrator"]["rel_tol"] == 1e-9);

  KineticConfig k;
  CHECK(to_json(k)["experimental"] == false);
  k.gamma_st = 0.1;
  CHECK(to_json(k)["experimental"] == true);

  LevelFits lf;
  lf.level = 3;
  lf.note = "saturated at every sweep time";
  const nlohmann::json f = fits_json({lf});
  CHECK(f[0]["survival"].is_null());
  CHECK(f[0]["note"] == "saturated at every sweep time");
}
