#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "test_helpers.hpp"
#include "zibbmr/io.hpp"

using namespace zibbmr;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t pos = text.find('\n', start);
    if (pos == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("dataset csv round trips exactly") {
  RngStream rng(81, 0);
  const Theta th = testing::random_theta(rng, 2, 1);
  auto synth = testing::random_dataset(rng, th, 6, 4);
  // Awkward covariate values that expose any lossy formatting.
  synth.data.subjects[0].obs[0].x(0) = 1.0 / 3.0;
  synth.data.subjects[0].obs[0].x(1) = -1e-300;
  synth.data.subjects[0].obs[1].z(0) = 123456789.123456789;
  synth.data.subjects[1].obs[0].x(0) = -0.0;

  const std::string csv = dataset_to_csv(synth.data);
  const auto lines = split_lines(csv);
  CHECK(lines[0] == "subject_id,time,y,s,x_1,x_2,z_1");
  CHECK(lines.size() == 1 + 6 * 4);

  const Dataset back = parse_dataset_csv(csv);
  REQUIRE(back.n_subjects() == synth.data.n_subjects());
  CHECK(back.dim_x == 2);
  CHECK(back.dim_z == 1);
  for (Index i = 0; i < back.n_subjects(); ++i) {
    const auto& orig = synth.data.subjects[static_cast<std::size_t>(i)];
    const auto& got = back.subjects[static_cast<std::size_t>(i)];
    CHECK(got.id == orig.id);
    REQUIRE(got.obs.size() == orig.obs.size());
    for (std::size_t t = 0; t < got.obs.size(); ++t) {
      CHECK(got.obs[t].y == orig.obs[t].y);
      CHECK(got.obs[t].s == orig.obs[t].s);
      CHECK((got.obs[t].x - orig.obs[t].x).cwiseAbs().maxCoeff() == 0.0);
      CHECK((got.obs[t].z - orig.obs[t].z).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("csv parsing groups by appearance and sorts by time") {
  const std::string csv =
      "subject_id,time,y,s,x_1,z_1\n"
      "s2,1,3,10,0.5,-0.25\n"
      "s1,2,0,8,1,2\n"
      "\n"
      "s1,1,4,9,0,1\n"
      "s2,2,5,12,1,0.125\n";
  const Dataset data = parse_dataset_csv(csv);
  REQUIRE(data.n_subjects() == 2);
  CHECK(data.subjects[0].id == "s2");
  CHECK(data.subjects[1].id == "s1");
  CHECK(data.subjects[0].obs[0].y == 3);
  CHECK(data.subjects[0].obs[1].y == 5);
  CHECK(data.subjects[1].obs[0].y == 4);  // time 1 row came later in the file
  CHECK(data.subjects[1].obs[1].y == 0);
  CHECK(data.subjects[1].obs[0].x(0) == 0.0);
  CHECK(data.subjects[1].obs[0].z(0) == 1.0);
}

TEST_CASE("csv column selection by name") {
  const std::string csv =
      "subject_id,time,y,s,dose,weight,x_1\n"
      "s1,1,2,10,0.5,70,1\n"
      "s1,2,3,10,1.5,71,0\n";
  const Dataset named = parse_dataset_csv(csv, {"dose"}, {"dose", "weight"});
  CHECK(named.dim_x == 1);
  CHECK(named.dim_z == 2);
  CHECK(named.subjects[0].obs[0].x(0) == 0.5);
  CHECK(named.subjects[0].obs[0].z(0) == 0.5);
  CHECK(named.subjects[0].obs[0].z(1) == 70.0);

  // Default selection takes only the x_* / z_* prefixed columns.
  const Dataset prefixed = parse_dataset_csv(csv);
  CHECK(prefixed.dim_x == 1);
  CHECK(prefixed.dim_z == 0);
  CHECK(prefixed.subjects[0].obs[0].x(0) == 1.0);

  CHECK_THROWS_WITH_AS(parse_dataset_csv(csv, {"missing"}, {}),
                       "line 1: missing column 'missing'",
                       std::invalid_argument);
}

TEST_CASE("csv parse errors name the offending line") {
  CHECK_THROWS_WITH_AS(parse_dataset_csv(""), "line 1: missing header row",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_dataset_csv("subject_id,time,y,s,x_1\n"),
                       "line 1: no data rows", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_dataset_csv("subject_id,time,y\ns1,1,2\n"),
                       "line 1: missing column 's'", std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_dataset_csv("subject_id,time,y,s,y\ns1,1,2,5,2\n"),
      "line 1: duplicate column 'y'", std::invalid_argument);
  const std::string head = "subject_id,time,y,s,x_1\n";
  CHECK_THROWS_WITH_AS(
      parse_dataset_csv(head + "s1,1,2,10,0\ns1,2,abc,10,0\n"),
      "line 3: y is not an integer: 'abc'", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_dataset_csv(head + "s1,1,12,10,0\n"),
                       "line 2: y exceeds s (12 > 10)",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_dataset_csv(head + "s1,1,0,0,0\n"),
                       "line 2: s must be >= 1", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_dataset_csv(head + "s1,1,-1,5,0\n"),
                       "line 2: y must be >= 0", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_dataset_csv(head + "s1,1,2,10\n"),
                       "line 2: expected 5 fields, found 4",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_dataset_csv(head + ",1,2,10,0\n"),
                       "line 2: empty subject_id", std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_dataset_csv(head + "s1,1,2,10,0\ns1,1,3,10,0\n"),
      "line 3: duplicate time 1 for subject s1", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_dataset_csv(head + "s1,1,2,10,zz\n"),
                       "line 2: x_1 is not a number: 'zz'",
                       std::invalid_argument);
}

TEST_CASE("parameter json round trips exactly") {
  Theta th;
  th.phi = 6.4;
  th.a = -0.1 + 0.3;  // deliberately non-representable arithmetic
  th.b = 1.0 / 7.0;
  th.alpha = Vector(2);
  th.alpha << 0.5, -1e-17;
  th.beta = Vector(1);
  th.beta << M_PI;
  th.sigma1_sq = 0.49;
  th.sigma2_sq = 5e300;

  const OrderedJson j = theta_to_json(th);
  // Key order is part of the file format.
  auto it = j.begin();
  CHECK(it.key() == "phi");
  ++it;
  CHECK(it.key() == "a");

  const OrderedJson reparsed = OrderedJson::parse(j.dump());
  const Theta back = theta_from_json(reparsed);
  CHECK(back.phi == th.phi);
  CHECK(back.a == th.a);
  CHECK(back.b == th.b);
  CHECK((back.alpha - th.alpha).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.beta - th.beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.sigma1_sq == th.sigma1_sq);
  CHECK(back.sigma2_sq == th.sigma2_sq);

  OrderedJson missing = j;
  missing.erase("phi");
  CHECK_THROWS(theta_from_json(missing));
}

TEST_CASE("moments json round trips and rejects malformed rows") {
  ConditionalMoments m;
  m.mean = {Vector2(0.1, -0.2), Vector2(1.5, 2.5)};
  m.m2 = {Vector2(0.5, 0.6), Vector2(3.0, 7.0)};
  const ConditionalMoments back =
      moments_from_json(OrderedJson::parse(moments_to_json(m).dump()));
  REQUIRE(back.mean.size() == 2);
  CHECK((back.mean[0] - m.mean[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.m2[1] - m.m2[1]).cwiseAbs().maxCoeff() == 0.0);

  OrderedJson bad;
  bad["mean"] = {{0.1, 0.2, 0.3}};
  bad["m2"] = {{0.1, 0.2}};
  CHECK_THROWS_WITH_AS(moments_from_json(bad),
                       "moments: expected [a, b] pairs",
                       std::invalid_argument);

  OrderedJson mismatched;
  mismatched["mean"] = {{0.1, 0.2}};
  mismatched["m2"] = OrderedJson::array();
  CHECK_THROWS_WITH_AS(moments_from_json(mismatched),
                       "moments: mean/m2 length mismatch",
                       std::invalid_argument);
}

TEST_CASE("run config json round trips every field except threads") {
  RunConfig rc;
  rc.fit.seed = 424242;
  rc.fit.chains = 7;
  rc.fit.steps = {111, 22};
  rc.fit.kernels.m1 = 2;
  rc.fit.kernels.m2 = 0;
  rc.fit.kernels.m3 = 3;
  rc.fit.mode = Mode::kAugmented;
  rc.fit.target_accept = 0.27;
  rc.fit.se_method = SeMethod::kNone;
  rc.fit.is.k = 123;
  rc.fit.is.nu = 4.5;
  rc.fit.moments_phase = MomentsPhase::kAveragingOnly;
  rc.fit.max_mstep_iter = 55;
  rc.fit.threads = 8;  // must not survive serialization
  Theta init;
  init.alpha = Vector::Constant(1, 0.4);
  init.beta = Vector::Constant(1, -0.2);
  rc.fit.init = init;
  rc.fit.fixed_alpha = {{0, 0.0}};
  rc.fit.fixed_beta = {{0, -0.5}};
  rc.x_cols = {"dose"};
  rc.z_cols = {"dose", "weight"};

  const OrderedJson j = run_config_to_json(rc);
  CHECK_FALSE(j.contains("threads"));
  CHECK(j["mode"] == "augmented");
  CHECK(j["se_method"] == "none");
  CHECK(j["moments_phase"] == "averaging_only");

  const RunConfig back = run_config_from_json(OrderedJson::parse(j.dump()));
  CHECK(back.fit.seed == rc.fit.seed);
  CHECK(back.fit.chains == rc.fit.chains);
  CHECK(back.fit.steps.k1 == 111);
  CHECK(back.fit.steps.k2 == 22);
  CHECK(back.fit.kernels.m1 == 2);
  CHECK(back.fit.kernels.m2 == 0);
  CHECK(back.fit.kernels.m3 == 3);
  CHECK(back.fit.mode == Mode::kAugmented);
  CHECK(back.fit.target_accept == 0.27);
  CHECK(back.fit.se_method == SeMethod::kNone);
  CHECK(back.fit.is.k == 123);
  CHECK(back.fit.is.nu == 4.5);
  CHECK(back.fit.moments_phase == MomentsPhase::kAveragingOnly);
  CHECK(back.fit.max_mstep_iter == 55);
  CHECK(back.fit.threads == 1);  // default restored, not the serialized run's
  REQUIRE(back.fit.init.has_value());
  CHECK(back.fit.init->alpha(0) == 0.4);
  REQUIRE(back.fit.fixed_alpha.size() == 1);
  CHECK(back.fit.fixed_alpha[0].first == 0);
  CHECK(back.fit.fixed_beta[0].second == -0.5);
  CHECK(back.x_cols == rc.x_cols);
  CHECK(back.z_cols == rc.z_cols);

  // An empty object falls back to the built-in defaults.
  const RunConfig defaults = run_config_from_json(OrderedJson::object());
  const FitConfig ref;
  CHECK(defaults.fit.chains == ref.chains);
  CHECK(defaults.fit.steps.k1 == ref.steps.k1);
  CHECK(defaults.fit.mode == Mode::kOriginal);
  CHECK(defaults.fit.se_method == SeMethod::kLouis);
  CHECK_FALSE(defaults.fit.init.has_value());
  CHECK(defaults.fit.fixed_alpha.empty());

  // Defaults leave optional keys null / absent.
  const OrderedJson jd = run_config_to_json(RunConfig{});
  CHECK(jd["init_theta"].is_null());
  CHECK_FALSE(jd.contains("fixed_alpha"));

  OrderedJson bad = j;
  bad["mode"] = "sideways";
  CHECK_THROWS_WITH_AS(run_config_from_json(bad),
                       "config: unknown mode 'sideways'",
                       std::invalid_argument);
  bad = j;
  bad["se_method"] = "bootstrap";
  CHECK_THROWS_AS(run_config_from_json(bad), std::invalid_argument);
}

TEST_CASE("fit result json carries the versioned envelope") {
  FitResult fr;
  fr.ok = true;
  fr.names = param_names(1, 1);
  fr.theta.phi = 6.0;
  fr.theta.alpha = Vector::Constant(1, 0.5);
  fr.theta.beta = Vector::Constant(1, -0.5);
  fr.loglik = -123.5;
  fr.loglik_mc_se = 0.25;
  fr.trajectory = Matrix::Zero(10, 7);
  fr.diag.accept_kern1 = 0.9;
  fr.diag.accept_kern2 = 0.3;
  fr.diag.final_drift = 0.001;
  fr.moments.mean = {Vector2(0.0, 0.0)};
  fr.moments.m2 = {Vector2(1.0, 1.0)};

  RunConfig rc;
  rc.fit.seed = 9;

  const OrderedJson j = fit_result_to_json(fr, rc);
  CHECK(j["schema"] == "zibbmr-result/1");
  CHECK(j["version"] == "0.1.0");
  CHECK(j["kind"] == "fit");
  CHECK(j["ok"] == true);
  CHECK_FALSE(j.contains("error"));
  CHECK(j["config"]["seed"] == 9);
  CHECK(j["names"].size() == 7);
  CHECK(j["names"][0] == "phi");
  CHECK(j["estimate"]["phi"] == 6.0);
  CHECK(j["packed"].size() == 7);
  CHECK(j["se"].is_null());
  CHECK(j["loglik"] == -123.5);
  CHECK(j["loglik_mc_se"] == 0.25);
  CHECK(j["diagnostics"]["accept_kern1"] == 0.9);
  CHECK(j["diagnostics"]["se_available"] == false);
  CHECK(j["trajectory_summary"]["iterations"] == 10);
  CHECK(j["moments"]["mean"].size() == 1);

  FitResult with_se = fr;
  with_se.se = Vector::Constant(7, 0.125);
  const OrderedJson js = fit_result_to_json(with_se, rc);
  REQUIRE(js["se"].is_array());
  CHECK(js["se"].size() == 7);
  CHECK(js["se"][3] == 0.125);

  FitResult failed;
  failed.ok = false;
  failed.error = "boom";
  failed.names = param_names(1, 1);
  failed.theta = fr.theta;
  const OrderedJson jf = fit_result_to_json(failed, rc);
  CHECK(jf["ok"] == false);
  CHECK(jf["error"] == "boom");
  CHECK_FALSE(jf.contains("loglik"));
}

TEST_CASE("benchmark tables print one row per entry") {
  MetricRow row;
  row.parameter = "phi";
  row.true_value = 6.4;
  row.bias = 0.1;
  row.rmse = 0.5;
  row.mae = 0.4;
  row.n_replicates = 100;
  MetricRow row2 = row;
  row2.parameter = "sigma1";
  row2.true_value = 0.7;

  const std::string csv = metrics_to_csv(1, {row, row2}, 3);
  const auto lines = split_lines(csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "setting,parameter,true,bias,rmse,mae,n_reps,n_fail");
  const auto f1 = split_fields(lines[1]);
  REQUIRE(f1.size() == 8);
  CHECK(f1[0] == "1");
  CHECK(f1[1] == "phi");
  CHECK(std::stod(f1[2]) == 6.4);
  CHECK(std::stod(f1[3]) == 0.1);
  CHECK(std::stod(f1[4]) == 0.5);
  CHECK(f1[6] == "100");
  CHECK(f1[7] == "3");
  CHECK(split_fields(lines[2])[1] == "sigma1");

  Type1Result t1;
  t1.n_reps = 200;
  t1.n_fail = 4;
  t1.rates = {{0.05, 0.078, 0.077, 0.063}, {0.01, 0.02, 0.015, 0.01}};
  const std::string tcsv = type1_to_csv(4, t1);
  const auto tlines = split_lines(tcsv);
  REQUIRE(tlines.size() == 3);
  CHECK(tlines[0] == "setting,level,wald_alpha1,wald_beta1,lrt_joint,n_reps,n_fail");
  const auto tf = split_fields(tlines[1]);
  REQUIRE(tf.size() == 7);
  CHECK(tf[0] == "4");
  CHECK(std::stod(tf[1]) == 0.05);
  CHECK(std::stod(tf[2]) == 0.078);
  CHECK(std::stod(tf[4]) == 0.063);
  CHECK(tf[5] == "196");
  CHECK(tf[6] == "4");
}

TEST_CASE("text files round trip and errors name the path") {
  const std::string path = "/tmp/zibbmr_io_test.txt";
  const std::string content = "line one\nline two\n\x01 binary-ish \xff\n";
  write_text_file(path, content);
  CHECK(read_text_file(path) == content);
  std::remove(path.c_str());

  CHECK_THROWS_WITH_AS(read_text_file("/tmp/zibbmr_io_missing_file.txt"),
                       "cannot open file: /tmp/zibbmr_io_missing_file.txt",
                       std::invalid_argument);
  CHECK_THROWS_AS(write_text_file("/nonexistent-dir/x.txt", "a"),
                  std::invalid_argument);

  // Dataset file helpers wrap the same primitives and prefix errors with
  // the path.
  const std::string data_path = "/tmp/zibbmr_io_test_data.csv";
  RngStream rng(82, 0);
  const Theta th = testing::random_theta(rng, 1, 1);
  const auto synth = testing::random_dataset(rng, th, 3, 2);
  write_dataset_csv(synth.data, data_path);
  const Dataset back = load_dataset_csv(data_path);
  CHECK(back.n_subjects() == 3);
  CHECK(back.subjects[2].obs[1].y == synth.data.subjects[2].obs[1].y);
  std::remove(data_path.c_str());

  write_text_file(data_path, "subject_id,time,y,s,x_1\ns1,1,9,5,0\n");
  try {
    load_dataset_csv(data_path);
    FAIL("expected a parse failure");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()) ==
          data_path + ": line 2: y exceeds s (9 > 5)");
  }
  std::remove(data_path.c_str());
}

}  // TEST_SUITE
