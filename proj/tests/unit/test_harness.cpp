#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <doctest.h>

#include "semcom/errors.hpp"
#include "semcom/harness.hpp"

using namespace semcom;

namespace {

// Measured noiseless ImageCom floor (0.1464 px mean KPE over 4 frames at 300x150);
// a regression guard for the color-template estimator, not a physical bound.
constexpr double kImageComNoiselessFloorPx = 0.15;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig small_config(const std::filesystem::path& out) {
  ExperimentConfig cfg = parse_experiment_config(R"({
    "rig": {"width": 96, "height_px": 48},
    "snr_db": ["inf", 0],
    "seeds": [1, 2],
    "frames": 2,
    "render_steps": 48
  })");
  cfg.output_dir = out;
  return cfg;
}

ExperimentConfig noiseless_config() {
  return parse_experiment_config(R"({
    "rig": {"width": 300, "height_px": 150},
    "snr_db": ["inf"],
    "seeds": [0],
    "frames": 4,
    "render_steps": 128,
    "write_artifacts": false
  })");
}

std::filesystem::path scratch(const char* name) {
  const auto p = std::filesystem::temp_directory_path() / "semcom_unit" / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing: defaults, overrides and errors") {
  const ExperimentConfig d = parse_experiment_config("{}");
  CHECK(d.frameworks.size() == 3);
  CHECK(d.snr_db.size() == 5);
  CHECK(d.frames == 4);
  CHECK(d.rig.count == 8);

  const ExperimentConfig c = parse_experiment_config(
      R"({"frameworks": ["s-gscm"], "snr_db": [3, "inf"], "seed_count": 3, "fading": "none",
          "rig": {"fov_deg": 60}})");
  CHECK(c.frameworks == std::vector<Framework>{Framework::s_gscm});
  CHECK(std::isinf(c.snr_db[1]));
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(c.fading == Fading::none);
  CHECK(c.rig.fov == doctest::Approx(std::acos(-1.0) / 3.0));

  CHECK_THROWS_AS(parse_experiment_config(R"({"framez": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"frameworks": ["nerf"]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"frames": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"seeds": [1], "seed_count": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"snr_db": []})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"rig": {"width": "wide"}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("{"), ConfigError);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/semcom.json"), ConfigError);
  CHECK_THROWS_AS(Experiment(parse_experiment_config(R"({"scenario": "moon"})")), ConfigError);
}

TEST_CASE("framework names round trip") {
  for (Framework f : {Framework::imagecom, Framework::m_gscm, Framework::s_gscm}) {
    CHECK(parse_framework(framework_name(f)) == f);
  }
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_number(0.1) == "0.1");
}

TEST_CASE("sweep covers the cross product, summarizes, and is byte-deterministic") {
  const auto dir_a = scratch("sweep_a");
  const auto dir_b = scratch("sweep_b");
  const SweepResult a = sweep(small_config(dir_a));
  const SweepResult b = sweep(small_config(dir_b));
  CHECK(a.records.size() == 3 * 2 * 2 * 2);
  CHECK(a.failed_rows == 0);

  REQUIRE(a.files.size() == b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    CHECK(a.files[i].filename() == b.files[i].filename());
    CHECK(read_file(a.files[i]) == read_file(b.files[i]));
  }
  CHECK(read_file(dir_a / "records.csv") == records_csv(a.records));

  // Independent aggregation of the raw rows.
  std::map<std::pair<int, double>, std::vector<double>> kpe_by_cell;
  for (const RunRecord& r : a.records) kpe_by_cell[{static_cast<int>(r.framework), r.snr_db}].push_back(r.kpe.mean_px);
  CHECK(a.summary.size() == kpe_by_cell.size());
  for (const SummaryRow& s : a.summary) {
    std::vector<double> v = kpe_by_cell.at({static_cast<int>(s.framework), s.snr_db});
    std::sort(v.begin(), v.end());
    const double med = v.size() % 2 ? v[v.size() / 2] : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2.0;
    CHECK(s.kpe_median == med);
    CHECK(s.rows == v.size());
  }

  // Both GSCM modes see the same channel realizations.
  std::map<std::tuple<double, std::uint64_t, int>, std::size_t> m_errors;
  for (const RunRecord& r : a.records) {
    if (r.framework == Framework::m_gscm) m_errors[{r.snr_db, r.seed, r.frame}] = r.bit_errors;
  }
  for (const RunRecord& r : a.records) {
    if (r.framework == Framework::s_gscm) CHECK(m_errors.at({r.snr_db, r.seed, r.frame}) == r.bit_errors);
  }
}

TEST_CASE("noiseless GSCM stays within the quantization bound; TD ordering holds") {
  Experiment exp(noiseless_config());
  const auto m = exp.run_gscm(ReconstructionMode::model_based, ChannelConfig::kNoiseless, 0);
  const auto s = exp.run_gscm(ReconstructionMode::scenery_based, ChannelConfig::kNoiseless, 0);
  const auto i = exp.run_imagecom(ChannelConfig::kNoiseless, 0);
  REQUIRE(m.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(m[t].status == "ok");
    CHECK(m[t].kpe.mean_px <= 1.0 / 16.0 + 1e-3);
    CHECK(s[t].kpe.mean_px <= 1.0 / 16.0 + 1e-3);
    CHECK(s[t].td.total_s <= m[t].td.total_s);
    CHECK(m[t].td.total_s < i[t].td.total_s);
    CHECK(i[t].td.airtime_s == doctest::Approx(0.864));
  }
  double floor = 0.0;
  for (const RunRecord& r : i) floor += r.kpe.mean_px / 4.0;
  MESSAGE("imagecom noiseless KPE floor: " << floor << " px");
  CHECK(floor <= kImageComNoiselessFloorPx);
}
