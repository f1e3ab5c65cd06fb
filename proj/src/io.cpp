#include "zibbmr/io.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace zibbmr {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw std::invalid_argument("line " + std::to_string(line_no) + ": " + what);
}

std::int64_t parse_int(const std::string& field, std::size_t line_no,
                       const std::string& column) {
  if (field.empty()) fail_line(line_no, "empty " + column + " field");
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(field.c_str(), &end, 10);
  if (errno != 0 || end != field.c_str() + field.size())
    fail_line(line_no, column + " is not an integer: '" + field + "'");
  return static_cast<std::int64_t>(v);
}

double parse_double(const std::string& field, std::size_t line_no,
                    const std::string& column) {
  if (field.empty()) fail_line(line_no, "empty " + column + " field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (errno != 0 || end != field.c_str() + field.size())
    fail_line(line_no, column + " is not a number: '" + field + "'");
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset parse_dataset_csv(const std::string& text,
                          const std::vector<std::string>& x_cols,
                          const std::vector<std::string>& z_cols) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("line 1: missing header row");
  const std::vector<std::string> header = split_csv_line(line);

  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!col_index.emplace(header[j], j).second)
      throw std::invalid_argument("line 1: duplicate column '" + header[j] +
                                  "'");
  }
  const auto require = [&](const char* name) {
    const auto it = col_index.find(name);
    if (it == col_index.end())
      throw std::invalid_argument(std::string("line 1: missing column '") +
                                  name + "'");
    return it->second;
  };
  const std::size_t c_subject = require("subject_id");
  const std::size_t c_time = require("time");
  const std::size_t c_y = require("y");
  const std::size_t c_s = require("s");

  const auto resolve = [&](const std::vector<std::string>& wanted,
                           const char prefix) {
    std::vector<std::pair<std::string, std::size_t>> cols;
    if (wanted.empty()) {
      for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j].size() > 2 && header[j][0] == prefix &&
            header[j][1] == '_')
          cols.emplace_back(header[j], j);
    } else {
      for (const auto& name : wanted) {
        const auto it = col_index.find(name);
        if (it == col_index.end())
          throw std::invalid_argument("line 1: missing column '" + name +
                                      "'");
        cols.emplace_back(name, it->second);
      }
    }
    return cols;
  };
  const auto x_sel = resolve(x_cols, 'x');
  const auto z_sel = resolve(z_cols, 'z');

  struct Row {
    std::int64_t time;
    std::size_t line_no;
    Observation obs;
  };
  std::vector<std::string> subject_order;
  std::unordered_map<std::string, std::vector<Row>> by_subject;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() < header.size())
      fail_line(line_no, "expected " + std::to_string(header.size()) +
                             " fields, found " +
                             std::to_string(fields.size()));
    const std::string& id = fields[c_subject];
    if (id.empty()) fail_line(line_no, "empty subject_id");
    Row row;
    row.line_no = line_no;
    row.time = parse_int(fields[c_time], line_no, "time");
    row.obs.y = parse_int(fields[c_y], line_no, "y");
    row.obs.s = parse_int(fields[c_s], line_no, "s");
    if (row.obs.s < 1) fail_line(line_no, "s must be >= 1");
    if (row.obs.y < 0) fail_line(line_no, "y must be >= 0");
    if (row.obs.y > row.obs.s)
      fail_line(line_no, "y exceeds s (" + std::to_string(row.obs.y) + " > " +
                             std::to_string(row.obs.s) + ")");
    row.obs.x = Vector(static_cast<Index>(x_sel.size()));
    for (std::size_t j = 0; j < x_sel.size(); ++j)
      row.obs.x(static_cast<Index>(j)) =
          parse_double(fields[x_sel[j].second], line_no, x_sel[j].first);
    row.obs.z = Vector(static_cast<Index>(z_sel.size()));
    for (std::size_t j = 0; j < z_sel.size(); ++j)
      row.obs.z(static_cast<Index>(j)) =
          parse_double(fields[z_sel[j].second], line_no, z_sel[j].first);

    auto it = by_subject.find(id);
    if (it == by_subject.end()) {
      subject_order.push_back(id);
      it = by_subject.emplace(id, std::vector<Row>()).first;
    }
    it->second.push_back(std::move(row));
  }
  if (subject_order.empty())
    throw std::invalid_argument("line 1: no data rows");

  Dataset data;
  data.dim_x = static_cast<Index>(x_sel.size());
  data.dim_z = static_cast<Index>(z_sel.size());
  data.subjects.reserve(subject_order.size());
  for (const auto& id : subject_order) {
    auto& rows = by_subject[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.time < b.time; });
    for (std::size_t k = 1; k < rows.size(); ++k)
      if (rows[k].time == rows[k - 1].time)
        fail_line(rows[k].line_no, "duplicate time " +
                                       std::to_string(rows[k].time) +
                                       " for subject " + id);
    Subject subject;
    subject.id = id;
    subject.obs.reserve(rows.size());
    for (auto& row : rows) subject.obs.push_back(std::move(row.obs));
    data.subjects.push_back(std::move(subject));
  }
  data.validate();
  return data;
}

Dataset load_dataset_csv(const std::string& path,
                         const std::vector<std::string>& x_cols,
                         const std::vector<std::string>& z_cols) {
  try {
    return parse_dataset_csv(read_text_file(path), x_cols, z_cols);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out = "subject_id,time,y,s";
  for (Index j = 0; j < data.dim_x; ++j)
    out += ",x_" + std::to_string(j + 1);
  for (Index j = 0; j < data.dim_z; ++j)
    out += ",z_" + std::to_string(j + 1);
  out += "\n";
  for (const auto& subject : data.subjects) {
    for (std::size_t t = 0; t < subject.obs.size(); ++t) {
      const Observation& o = subject.obs[t];
      out += subject.id;
      out += "," + std::to_string(t + 1);
      out += "," + std::to_string(o.y);
      out += "," + std::to_string(o.s);
      for (Index j = 0; j < data.dim_x; ++j)
        out += "," + format_double(o.x(j));
      for (Index j = 0; j < data.dim_z; ++j)
        out += "," + format_double(o.z(j));
      out += "\n";
    }
  }
  return out;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  write_text_file(path, dataset_to_csv(data));
}

OrderedJson theta_to_json(const Theta& theta) {
  OrderedJson j;
  j["phi"] = theta.phi;
  j["a"] = theta.a;
  j["b"] = theta.b;
  j["alpha"] = std::vector<double>(theta.alpha.begin(), theta.alpha.end());
  j["beta"] = std::vector<double>(theta.beta.begin(), theta.beta.end());
  j["sigma1_sq"] = theta.sigma1_sq;
  j["sigma2_sq"] = theta.sigma2_sq;
  return j;
}

Theta theta_from_json(const OrderedJson& j) {
  Theta theta;
  theta.phi = j.at("phi").get<double>();
  theta.a = j.at("a").get<double>();
  theta.b = j.at("b").get<double>();
  const auto alpha = j.at("alpha").get<std::vector<double>>();
  const auto beta = j.at("beta").get<std::vector<double>>();
  theta.alpha = Eigen::Map<const Vector>(alpha.data(),
                                         static_cast<Index>(alpha.size()));
  theta.beta =
      Eigen::Map<const Vector>(beta.data(), static_cast<Index>(beta.size()));
  theta.sigma1_sq = j.at("sigma1_sq").get<double>();
  theta.sigma2_sq = j.at("sigma2_sq").get<double>();
  return theta;
}

OrderedJson moments_to_json(const ConditionalMoments& moments) {
  OrderedJson j;
  auto dump = [](const std::vector<Vector2>& v) {
    std::vector<std::array<double, 2>> rows;
    rows.reserve(v.size());
    for (const auto& m : v) rows.push_back({m(0), m(1)});
    return rows;
  };
  j["mean"] = dump(moments.mean);
  j["m2"] = dump(moments.m2);
  return j;
}

ConditionalMoments moments_from_json(const OrderedJson& j) {
  ConditionalMoments moments;
  auto load = [](const OrderedJson& arr) {
    std::vector<Vector2> v;
    v.reserve(arr.size());
    for (const auto& row : arr) {
      if (!row.is_array() || row.size() != 2)
        throw std::invalid_argument("moments: expected [a, b] pairs");
      v.push_back(Vector2(row[0].get<double>(), row[1].get<double>()));
    }
    return v;
  };
  moments.mean = load(j.at("mean"));
  moments.m2 = load(j.at("m2"));
  if (moments.mean.size() != moments.m2.size())
    throw std::invalid_argument("moments: mean/m2 length mismatch");
  return moments;
}

namespace {

const char* mode_name(Mode mode) {
  return mode == Mode::kAugmented ? "augmented" : "original";
}

Mode mode_from_name(const std::string& name) {
  if (name == "original") return Mode::kOriginal;
  if (name == "augmented") return Mode::kAugmented;
  throw std::invalid_argument("config: unknown mode '" + name + "'");
}

OrderedJson fixed_to_json(const FixedCoords& fixed) {
  OrderedJson arr = OrderedJson::array();
  for (const auto& [j, v] : fixed) arr.push_back({{"index", j}, {"value", v}});
  return arr;
}

FixedCoords fixed_from_json(const OrderedJson& arr) {
  FixedCoords fixed;
  for (const auto& e : arr)
    fixed.emplace_back(e.at("index").get<Index>(),
                       e.at("value").get<double>());
  return fixed;
}

}  // namespace

OrderedJson run_config_to_json(const RunConfig& config) {
  const FitConfig& f = config.fit;
  OrderedJson j;
  j["seed"] = f.seed;
  j["chains"] = f.chains;
  j["k1"] = f.steps.k1;
  j["k2"] = f.steps.k2;
  j["m1"] = f.kernels.m1;
  j["m2"] = f.kernels.m2;
  j["m3"] = f.kernels.m3;
  j["mode"] = mode_name(f.mode);
  j["target_accept"] = f.target_accept;
  j["se_method"] = f.se_method == SeMethod::kLouis ? "louis" : "none";
  j["is_k"] = f.is.k;
  j["is_nu"] = f.is.nu;
  j["moments_phase"] =
      f.moments_phase == MomentsPhase::kAll ? "all" : "averaging_only";
  j["max_mstep_iter"] = f.max_mstep_iter;
  j["init_theta"] = f.init ? theta_to_json(*f.init) : OrderedJson(nullptr);
  if (!f.fixed_alpha.empty()) j["fixed_alpha"] = fixed_to_json(f.fixed_alpha);
  if (!f.fixed_beta.empty()) j["fixed_beta"] = fixed_to_json(f.fixed_beta);
  j["x_cols"] = config.x_cols;
  j["z_cols"] = config.z_cols;
  return j;
}

RunConfig run_config_from_json(const OrderedJson& j) {
  RunConfig config;
  FitConfig& f = config.fit;
  const auto opt = [&](const char* key) -> const OrderedJson* {
    const auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
  };
  if (const auto* v = opt("seed")) f.seed = v->get<std::uint64_t>();
  if (const auto* v = opt("chains")) f.chains = v->get<int>();
  if (const auto* v = opt("k1")) f.steps.k1 = v->get<int>();
  if (const auto* v = opt("k2")) f.steps.k2 = v->get<int>();
  if (const auto* v = opt("m1")) f.kernels.m1 = v->get<int>();
  if (const auto* v = opt("m2")) f.kernels.m2 = v->get<int>();
  if (const auto* v = opt("m3")) f.kernels.m3 = v->get<int>();
  if (const auto* v = opt("mode")) f.mode = mode_from_name(v->get<std::string>());
  if (const auto* v = opt("target_accept")) f.target_accept = v->get<double>();
  if (const auto* v = opt("se_method")) {
    const std::string name = v->get<std::string>();
    if (name == "louis")
      f.se_method = SeMethod::kLouis;
    else if (name == "none")
      f.se_method = SeMethod::kNone;
    else
      throw std::invalid_argument("config: unknown se_method '" + name + "'");
  }
  if (const auto* v = opt("is_k")) f.is.k = v->get<int>();
  if (const auto* v = opt("is_nu")) f.is.nu = v->get<double>();
  if (const auto* v = opt("moments_phase")) {
    const std::string name = v->get<std::string>();
    if (name == "all")
      f.moments_phase = MomentsPhase::kAll;
    else if (name == "averaging_only")
      f.moments_phase = MomentsPhase::kAveragingOnly;
    else
      throw std::invalid_argument("config: unknown moments_phase '" + name +
                                  "'");
  }
  if (const auto* v = opt("max_mstep_iter")) f.max_mstep_iter = v->get<int>();
  if (const auto* v = opt("init_theta")) f.init = theta_from_json(*v);
  if (const auto* v = opt("fixed_alpha")) f.fixed_alpha = fixed_from_json(*v);
  if (const auto* v = opt("fixed_beta")) f.fixed_beta = fixed_from_json(*v);
  if (const auto* v = opt("x_cols"))
    config.x_cols = v->get<std::vector<std::string>>();
  if (const auto* v = opt("z_cols"))
    config.z_cols = v->get<std::vector<std::string>>();
  return config;
}

OrderedJson fit_result_to_json(const FitResult& result,
                               const RunConfig& config) {
  OrderedJson j;
  j["schema"] = kResultSchema;
  j["version"] = kVersion;
  j["kind"] = "fit";
  j["ok"] = result.ok;
  if (!result.ok) j["error"] = result.error;
  j["config"] = run_config_to_json(config);
  j["names"] = result.names;
  j["estimate"] = theta_to_json(result.theta);
  const Vector packed = pack_theta(result.theta);
  j["packed"] = std::vector<double>(packed.begin(), packed.end());
  if (result.se) {
    j["se"] = std::vector<double>(result.se->begin(), result.se->end());
  } else {
    j["se"] = nullptr;
  }
  if (result.ok) {
    j["loglik"] = result.loglik;
    j["loglik_mc_se"] = result.loglik_mc_se;
  }
  OrderedJson diag;
  diag["accept_kern1"] = result.diag.accept_kern1;
  diag["accept_kern2"] = result.diag.accept_kern2;
  diag["accept_kern3"] = result.diag.accept_kern3;
  diag["mstep_nonconverged"] = result.diag.mstep_nonconverged;
  diag["logistic_ridged_iters"] = result.diag.logistic_ridged_iters;
  diag["final_drift"] = result.diag.final_drift;
  diag["se_available"] = result.diag.se_available;
  j["diagnostics"] = diag;
  OrderedJson traj;
  traj["iterations"] = result.trajectory.rows();
  traj["drift_last50"] = result.diag.final_drift;
  j["trajectory_summary"] = traj;
  j["moments"] = moments_to_json(result.moments);
  return j;
}

std::string metrics_to_csv(int setting_id,
                           const std::vector<MetricRow>& rows, int n_fail) {
  std::string out = "setting,parameter,true,bias,rmse,mae,n_reps,n_fail\n";
  for (const auto& row : rows) {
    out += std::to_string(setting_id);
    out += "," + row.parameter;
    out += "," + format_double(row.true_value);
    out += "," + format_double(row.bias);
    out += "," + format_double(row.rmse);
    out += "," + format_double(row.mae);
    out += "," + std::to_string(row.n_replicates);
    out += "," + std::to_string(n_fail);
    out += "\n";
  }
  return out;
}

std::string type1_to_csv(int setting_id, const Type1Result& result) {
  std::string out =
      "setting,level,wald_alpha1,wald_beta1,lrt_joint,n_reps,n_fail\n";
  for (const auto& row : result.rates) {
    out += std::to_string(setting_id);
    out += "," + format_double(row.level);
    out += "," + format_double(row.wald_alpha1);
    out += "," + format_double(row.wald_beta1);
    out += "," + format_double(row.lrt_joint);
    out += "," + std::to_string(result.n_reps - result.n_fail);
    out += "," + std::to_string(result.n_fail);
    out += "\n";
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot open file for write: " + path);
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace zibbmr
