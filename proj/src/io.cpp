#include "qfl/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

namespace qfl {

namespace {

using nlohmann::json;

bool parse_double(const std::string& field, double& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_int(const std::string& field, long& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string loss_name(LossKind loss) {
  return loss == LossKind::quantile ? "quantile" : "squared";
}

LossKind loss_from_name(const std::string& name) {
  if (name == "quantile") return LossKind::quantile;
  if (name == "squared") return LossKind::squared;
  throw DataError("unknown loss kind '" + name + "'");
}

std::string basis_kind_name(BasisKind kind) {
  return kind == BasisKind::polynomial ? "polynomial" : "truncated_power_spline";
}

json vectors_to_json(const std::vector<Eigen::VectorXd>& vs) {
  json arr = json::array();
  for (const auto& v : vs) {
    json row = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
    arr.push_back(std::move(row));
  }
  return arr;
}

std::vector<Eigen::VectorXd> vectors_from_json(const json& arr, const char* what) {
  if (!arr.is_array()) throw DataError(std::string("fit field '") + what + "' must be an array");
  std::vector<Eigen::VectorXd> out;
  for (const auto& row : arr) {
    if (!row.is_array()) throw DataError(std::string("fit field '") + what + "' must hold arrays");
    Eigen::VectorXd v(row.size());
    Eigen::Index i = 0;
    for (const auto& x : row) {
      if (!x.is_number()) throw DataError(std::string("fit field '") + what + "' must be numeric");
      v[i++] = x.get<double>();
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

PanelDataset parse_option_chain(std::istream& in) {
  std::string line;
  long line_no = 0;

  if (!std::getline(in, line)) throw DataError("empty input: missing header");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line != "day,strike,price")
    throw DataError("header must be exactly 'day,strike,price'", line_no);

  struct Row {
    long day;
    double strike;
    double price;
    long line;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) throw DataError("expected 3 comma-separated fields", line_no);
    Row row{};
    row.line = line_no;
    if (!parse_int(fields[0], row.day) || row.day <= 0)
      throw DataError("day must be a positive integer", line_no);
    if (!parse_double(fields[1], row.strike) || !std::isfinite(row.strike))
      throw DataError("strike must be a finite number", line_no);
    if (!parse_double(fields[2], row.price) || !std::isfinite(row.price))
      throw DataError("price must be a finite number", line_no);
    rows.push_back(row);
  }
  if (rows.empty()) throw DataError("no data rows after the header");

  std::vector<long> days;
  std::vector<double> strikes;
  for (const Row& r : rows) {
    days.push_back(r.day);
    strikes.push_back(r.strike);
  }
  std::sort(days.begin(), days.end());
  days.erase(std::unique(days.begin(), days.end()), days.end());
  std::sort(strikes.begin(), strikes.end());
  strikes.erase(std::unique(strikes.begin(), strikes.end()), strikes.end());

  std::map<long, int> day_index;
  for (std::size_t k = 0; k < days.size(); ++k) day_index[days[k]] = static_cast<int>(k);
  std::map<double, int> strike_index;
  for (std::size_t k = 0; k < strikes.size(); ++k)
    strike_index[strikes[k]] = static_cast<int>(k);

  PanelDataset data;
  data.strikes = strikes;
  data.prices.setZero(static_cast<Eigen::Index>(days.size()),
                      static_cast<Eigen::Index>(strikes.size()));
  data.observed.setConstant(static_cast<Eigen::Index>(days.size()),
                            static_cast<Eigen::Index>(strikes.size()), false);
  for (const Row& r : rows) {
    const int t = day_index[r.day];
    const int i = strike_index[r.strike];
    if (data.observed(t, i))
      throw DataError("duplicate cell for day " + std::to_string(r.day) + ", strike " +
                          format_double(r.strike),
                      r.line);
    data.observed(t, i) = true;
    data.prices(t, i) = r.price;
  }
  validate_panel(data);
  return data;
}

PanelDataset load_option_chain(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  return parse_option_chain(in);
}

std::string fit_to_json(const FitArtifact& fit) {
  json j;
  j["schema"] = fit.schema;
  j["basis"] = {
      {"kind", basis_kind_name(fit.basis.kind)},
      {"degree", fit.basis.degree},
      {"knots", fit.basis.knots},
      {"lo", fit.basis.lo},
      {"hi", fit.basis.hi},
      {"scale_offset", fit.basis.scale_offset},
      {"scale_width", fit.basis.scale_width},
  };
  j["tau"] = fit.tau;
  j["lambda"] = fit.lambda;
  j["loss"] = loss_name(fit.loss);
  j["constraints"] = {{"noninc", fit.constraints.noninc}, {"convex", fit.constraints.convex}};
  j["betas"] = vectors_to_json(fit.betas);
  j["thetas"] = vectors_to_json(fit.thetas);
  j["changepoints"] = fit.changepoints;
  json segs = json::array();
  for (const auto& [a, b] : fit.segments) segs.push_back(json::array({a, b}));
  j["segments"] = std::move(segs);
  j["refit_applied"] = fit.refit_applied;
  if (fit.refit_applied) j["penalized_betas"] = vectors_to_json(fit.penalized_betas);
  j["solver"] = {
      {"converged", fit.converged},
      {"iterations", fit.iterations},
      {"objective", fit.objective},
      {"primal_residual", fit.primal_residual},
      {"dual_residual", fit.dual_residual},
  };
  j["input"] = {
      {"rows", fit.input_rows},
      {"strike_lo", fit.input_strike_lo},
      {"strike_hi", fit.input_strike_hi},
      {"hash", fit.input_hash},
  };
  return j.dump(2) + "\n";
}

FitArtifact fit_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid fit JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("schema", -1) != 1)
      throw DataError("unsupported fit schema (expected schema 1)");
    FitArtifact fit;
    const json& jb = j.at("basis");
    const std::string kind = jb.at("kind").get<std::string>();
    const int degree = jb.at("degree").get<int>();
    const double lo = jb.at("lo").get<double>();
    const double hi = jb.at("hi").get<double>();
    std::vector<double> knots = jb.at("knots").get<std::vector<double>>();
    if (kind == "polynomial") {
      fit.basis = make_polynomial_basis(degree, lo, hi);
    } else if (kind == "truncated_power_spline") {
      fit.basis = make_truncated_spline_basis(degree, std::move(knots), lo, hi);
    } else {
      throw DataError("unknown basis kind '" + kind + "'");
    }
    fit.basis.scale_offset = jb.value("scale_offset", 0.0);
    fit.basis.scale_width = jb.value("scale_width", 1.0);
    if (!(fit.basis.scale_width > 0.0)) throw DataError("scale_width must be > 0");

    fit.tau = j.at("tau").get<double>();
    fit.lambda = j.at("lambda").get<double>();
    if (!(fit.tau > 0.0 && fit.tau < 1.0)) throw DataError("tau must lie in (0, 1)");
    if (!(fit.lambda >= 0.0)) throw DataError("lambda must be >= 0");
    fit.loss = loss_from_name(j.at("loss").get<std::string>());
    fit.constraints.noninc = j.at("constraints").at("noninc").get<bool>();
    fit.constraints.convex = j.at("constraints").at("convex").get<bool>();

    fit.betas = vectors_from_json(j.at("betas"), "betas");
    fit.thetas = vectors_from_json(j.at("thetas"), "thetas");
    if (fit.betas.empty()) throw DataError("fit must contain at least one day");
    const Eigen::Index p = fit.basis.size();
    for (const auto& beta : fit.betas)
      if (beta.size() != p) throw DataError("beta length does not match the basis");
    if (fit.thetas.size() + 1 != fit.betas.size())
      throw DataError("theta count must be one less than the day count");
    for (const auto& theta : fit.thetas)
      if (theta.size() != p) throw DataError("theta length does not match the basis");

    fit.changepoints = j.at("changepoints").get<std::vector<int>>();
    for (const auto& seg : j.at("segments"))
      fit.segments.emplace_back(seg.at(0).get<int>(), seg.at(1).get<int>());
    fit.refit_applied = j.value("refit_applied", false);
    if (fit.refit_applied) {
      fit.penalized_betas = vectors_from_json(j.at("penalized_betas"), "penalized_betas");
      if (fit.penalized_betas.size() != fit.betas.size())
        throw DataError("penalized path length does not match the day count");
      for (const auto& beta : fit.penalized_betas)
        if (beta.size() != p) throw DataError("penalized beta length does not match the basis");
    }

    const json& js = j.at("solver");
    fit.converged = js.at("converged").get<bool>();
    fit.iterations = js.at("iterations").get<int>();
    fit.objective = js.at("objective").get<double>();
    fit.primal_residual = js.at("primal_residual").get<double>();
    fit.dual_residual = js.at("dual_residual").get<double>();

    const json& ji = j.at("input");
    fit.input_rows = ji.at("rows").get<long>();
    fit.input_strike_lo = ji.at("strike_lo").get<double>();
    fit.input_strike_hi = ji.at("strike_hi").get<double>();
    fit.input_hash = ji.at("hash").get<std::string>();
    return fit;
  } catch (const json::exception& e) {
    throw DataError(std::string("fit JSON is missing or mistypes a field: ") + e.what());
  }
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("failed while writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
  }
}

void save_fit(const FitArtifact& fit, const std::string& path) {
  atomic_write_file(path, fit_to_json(fit));
}

FitArtifact load_fit(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open fit file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return fit_from_json(buf.str());
}

void emit_curve(const FitArtifact& fit, int grid_size, const std::vector<int>& days,
                std::ostream& out) {
  if (grid_size < 2) throw ConfigError("grid size must be >= 2");
  const int T = static_cast<int>(fit.betas.size());
  std::vector<int> selected = days;
  if (selected.empty())
    for (int t = 1; t <= T; ++t) selected.push_back(t);
  for (int t : selected)
    if (t < 1 || t > T) throw ConfigError("requested day outside 1..T");

  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  for (int g = 0; g < grid_size; ++g)
    grid[static_cast<std::size_t>(g)] =
        g == 0 ? fit.basis.lo
        : g == grid_size - 1
            ? fit.basis.hi
            : fit.basis.lo + (fit.basis.hi - fit.basis.lo) * g / (grid_size - 1);
  const Eigen::MatrixXd X = build_design_rows(fit.basis, grid);

  out << "time,strike,price\n";
  for (int t : selected) {
    const Eigen::VectorXd prices = X * fit.betas[static_cast<std::size_t>(t - 1)];
    for (int g = 0; g < grid_size; ++g)
      out << t << ',' << format_double(grid[static_cast<std::size_t>(g)]) << ','
          << format_double(prices[g]) << '\n';
  }
}

std::string simulation_report_json(const SimulationReport& report) {
  json j;
  j["T"] = report.T;
  j["n"] = report.n;
  j["reps"] = report.reps;
  j["phases"] = report.phases == PhaseLayout::two ? "two" : "five";
  j["errors"] = report.errors == ErrorDist::normal ? "normal" : "cauchy";
  j["loss"] = loss_name(report.loss);
  j["tau"] = report.tau;
  j["lambda"] = report.lambda;
  j["refit"] = report.refit;
  j["seed"] = report.seed;
  j["mean_med"] = report.mean_med;
  j["mean_mad"] = report.mean_mad;
  j["mean_discovered"] = report.mean_discovered;
  j["mean_count_ratio"] = report.mean_count_ratio;
  j["nonconverged"] = report.nonconverged;
  json reps = json::array();
  for (const RepResult& r : report.replications)
    reps.push_back({
        {"med", r.med},
        {"mad", r.mad},
        {"discovered", r.discovered},
        {"count_ratio", r.count_ratio},
        {"n_changepoints", r.n_changepoints},
        {"converged", r.converged},
    });
  j["replications"] = std::move(reps);
  return j.dump(2) + "\n";
}

std::string simulation_report_table(const SimulationReport& report) {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "scenario: %s-phase  T=%d  n=%d  errors=%s  loss=%s  tau=%.2f\n",
                report.phases == PhaseLayout::two ? "two" : "five", report.T, report.n,
                report.errors == ErrorDist::normal ? "normal" : "cauchy",
                loss_name(report.loss).c_str(), report.tau);
  out += buf;
  std::snprintf(buf, sizeof buf, "lambda=%.6g  reps=%d  seed=%llu  refit=%s\n",
                report.lambda, report.reps,
                static_cast<unsigned long long>(report.seed),
                report.refit ? "yes" : "no");
  out += buf;
  std::snprintf(buf, sizeof buf, "%12s %12s %12s %12s %10s\n", "MED", "MAD", "discovered",
                "count-ratio", "nonconv");
  out += buf;
  std::snprintf(buf, sizeof buf, "%12.5f %12.5f %12.3f %12.3f %10d\n", report.mean_med,
                report.mean_mad, report.mean_discovered, report.mean_count_ratio,
                report.nonconverged);
  out += buf;
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string file_fingerprint_hash(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string synthetic_chain_csv(std::uint64_t seed) {
  Rng rng(seed);
  std::string out = "day,strike,price\n";
  char buf[64];
  const double scale = 3.0;
  for (int day = 1; day <= 21; ++day) {
    const double level = day <= 11 ? 190.0 : 187.0;
    for (int i = 0; i < 36; ++i) {
      const double strike = 170.0 + i;
      const double value = scale * std::log1p(std::exp((level - strike) / scale));
      const double noise = 0.03 * (2.0 * rng.uniform() - 1.0);
      std::snprintf(buf, sizeof buf, "%d,%g,%.4f\n", day, strike, value + noise);
      out += buf;
    }
  }
  return out;
}

}  // namespace qfl
