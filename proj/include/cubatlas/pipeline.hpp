// Batch pipeline: gen -> validate -> homogenize -> summarize -> classify ->
// persist, plus the grouped Kruskal-Wallis report.
//
// Config files are "key = value" lines; '#' starts a comment.
//
//   groups = all                # or 221, or 195-206,221
//   n = 64
//   rho = uniform 0.05 0.5      # or 0.3, or 0.1:0.5:0.1 (inclusive grid)
//   count = 50                  # per group and per rho value
//   seed = 1
//   erosion = connected         # or post-hoc
//   max_attempts = 20
//   E = 205000
//   nu = 0.29
//   void_contrast = 1e-9
//   tol = 1e-6
//   max_iter = 0                # 0 -> 10 n
//   preconditioner = auto       # jacobi, cholesky
//   jacobi_density = 0.16
//   jacobi_max_iter = 0         # 0 -> max(40 n, max_iter)
//   threads = 0                 # 0 -> CUBATLAS_THREADS or all cores
//   isotropic_omega = 0.05      # and the other Thresholds fields
//   out = atlas.cma
//   csv = atlas.csv             # default: out + .csv
//   report = atlas.report.txt   # default: out + .report.txt
//   stats_rho_min = 0.05
//   stats_rho_max = 0.5
//
// Every planned structure gets a seed derived from (seed, group, ordinal)
// and, for uniform schedules, a target density drawn from that seed, so a
// (group, seed) pair names one (group, seed, rho) work item. Records already
// in the output are skipped; the output metadata must match the config.

#ifndef CUBATLAS_PIPELINE_HPP_
#define CUBATLAS_PIPELINE_HPP_

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "elastica.hpp"
#include "errors.hpp"
#include "genesis.hpp"
#include "homog.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "symgroup.hpp"

namespace cubatlas {

struct DensitySchedule {
  enum class Kind { Fixed, Grid, Uniform };
  Kind kind = Kind::Fixed;
  double lo = 0.3, hi = 0.3, step = 0;

  // Fixed and Grid values; empty for Uniform.
  std::vector<double> values() const {
    if (kind == Kind::Fixed)
      return {lo};
    std::vector<double> v;
    if (kind == Kind::Grid) {
      const auto steps = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
      for (long i = 0; i <= steps; ++i)
        v.push_back(lo + static_cast<double>(i) * step);
    }
    return v;
  }

  std::string to_string() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::Fixed:
      os << format_double(lo);
      break;
    case Kind::Grid:
      os << format_double(lo) << ':' << format_double(hi) << ':' << format_double(step);
      break;
    case Kind::Uniform:
      os << "uniform " << format_double(lo) << ' ' << format_double(hi);
      break;
    }
    return os.str();
  }
};

namespace impl {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline double to_number(const std::string& key, const std::string& v) {
  double x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

inline long to_integer(const std::string& key, const std::string& v) {
  long x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": not an integer: '" + v + "'");
  return x;
}

inline std::uint64_t to_seed(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": not an unsigned integer: '" + v + "'");
  return x;
}

} // namespace impl

// "all", "221", "195-206,221".
inline std::vector<int> parse_groups(const std::string& text) {
  const std::string t = impl::trim(text);
  std::vector<int> out;
  if (t == "all") {
    for (int g = first_cubic_group; g <= last_cubic_group; ++g)
      out.push_back(g);
    return out;
  }
  std::set<int> seen;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = impl::trim(item);
    const auto dash = item.find('-');
    long a = 0, b = 0;
    if (dash == std::string::npos) {
      a = b = impl::to_integer("groups", item);
    } else {
      a = impl::to_integer("groups", impl::trim(item.substr(0, dash)));
      b = impl::to_integer("groups", impl::trim(item.substr(dash + 1)));
    }
    if (a > b)
      throw ConfigError("groups: empty range '" + item + "'");
    for (long g = a; g <= b; ++g) {
      if (g < first_cubic_group || g > last_cubic_group)
        throw ConfigError("groups: " + std::to_string(g) + " is not a cubic space group (195..230)");
      if (seen.insert(static_cast<int>(g)).second)
        out.push_back(static_cast<int>(g));
    }
  }
  if (out.empty())
    throw ConfigError("groups: no groups given");
  return out;
}

// "0.3", "0.05:0.5:0.05", "uniform 0.05 0.5".
inline DensitySchedule parse_density(const std::string& text) {
  const std::string t = impl::trim(text);
  DensitySchedule d;
  if (t.rfind("uniform", 0) == 0) {
    std::istringstream is(t.substr(7));
    std::string a, b, extra;
    if (!(is >> a >> b) || (is >> extra))
      throw ConfigError("rho: expected 'uniform <lo> <hi>'");
    d.kind = DensitySchedule::Kind::Uniform;
    d.lo = impl::to_number("rho", a);
    d.hi = impl::to_number("rho", b);
  } else if (t.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(t);
    std::string p;
    while (std::getline(ss, p, ':'))
      parts.push_back(impl::trim(p));
    if (parts.size() != 3)
      throw ConfigError("rho: expected '<lo>:<hi>:<step>'");
    d.kind = DensitySchedule::Kind::Grid;
    d.lo = impl::to_number("rho", parts[0]);
    d.hi = impl::to_number("rho", parts[1]);
    d.step = impl::to_number("rho", parts[2]);
    if (!(d.step > 0))
      throw ConfigError("rho: grid step must be positive");
  } else {
    d.lo = d.hi = impl::to_number("rho", t);
  }
  if (!(d.lo > 0 && d.hi <= 1 && d.lo <= d.hi))
    throw ConfigError("rho: densities must satisfy 0 < lo <= hi <= 1");
  return d;
}

struct PipelineConfig {
  std::vector<int> groups = parse_groups("all");
  int n = 64;
  DensitySchedule rho;
  int count = 1;
  std::uint64_t seed = 1;
  ErosionMode erosion = ErosionMode::Connected;
  int max_attempts = 20;
  Material material;
  SolverOptions solver;
  int threads = 0;
  Thresholds thresholds;
  std::filesystem::path out = "atlas.cma";
  std::filesystem::path csv, report;  // empty -> derived from out
  double stats_rho_min = 0.0, stats_rho_max = 1.0;

  std::filesystem::path csv_path() const {
    return csv.empty() ? std::filesystem::path(out.string() + ".csv") : csv;
  }
  std::filesystem::path report_path() const {
    return report.empty() ? std::filesystem::path(out.string() + ".report.txt") : report;
  }
  int worker_count() const { return threads > 0 ? threads : default_threads(); }

  void check() const {
    if (groups.empty())
      throw ConfigError("no groups");
    for (int g : groups)
      if (g < first_cubic_group || g > last_cubic_group)
        throw ConfigError("group " + std::to_string(g) + " is not a cubic space group (195..230)");
    if (n < 4 || n > 512 || n % 4 != 0)
      throw ConfigError("n must be a multiple of 4 in [4, 512]");
    if (count < 1)
      throw ConfigError("count must be at least 1");
    if (max_attempts < 1)
      throw ConfigError("max_attempts must be at least 1");
    if (rho.lo < min_dataset_density)
      throw ConfigError("rho below the 0.05 dataset filter");
    if (!(stats_rho_min <= stats_rho_max))
      throw ConfigError("stats_rho_min must not exceed stats_rho_max");
    if (!(solver.tol > 0) || solver.max_iter < 0 || solver.jacobi_max_iter < 0)
      throw ConfigError("tol must be positive and max_iter, jacobi_max_iter non-negative");
    try {
      material.check();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    thresholds.check();
  }
};

namespace impl {

inline void set_threshold(Thresholds& t, const std::string& key, double v, bool* known) {
  *known = true;
  if (key == "isotropic_omega")
    t.isotropic_omega = v;
  else if (key == "auxetic_nu")
    t.auxetic_nu = v;
  else if (key == "optimal_fraction")
    t.optimal_fraction = v;
  else if (key == "anisotropic_z_high")
    t.anisotropic_z_high = v;
  else if (key == "anisotropic_z_low")
    t.anisotropic_z_low = v;
  else if (key == "pentamode_ratio")
    t.pentamode_ratio = v;
  else if (key == "pentamode_cos")
    t.pentamode_cos = v;
  else
    *known = false;
}

template <class Fn>
void for_each_entry(std::istream& in, Fn&& fn) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    fn(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

} // namespace impl

inline Thresholds parse_thresholds(std::istream& in) {
  Thresholds t;
  impl::for_each_entry(in, [&](const std::string& k, const std::string& v) {
    bool known = false;
    impl::set_threshold(t, k, impl::to_number(k, v), &known);
    if (!known)
      throw ConfigError("unknown threshold '" + k + "'");
  });
  t.check();
  return t;
}

inline PipelineConfig parse_config(std::istream& in) {
  PipelineConfig c;
  impl::for_each_entry(in, [&](const std::string& k, const std::string& v) {
    using impl::to_integer;
    using impl::to_number;
    bool known = false;
    if (k == "groups")
      c.groups = parse_groups(v);
    else if (k == "n")
      c.n = static_cast<int>(to_integer(k, v));
    else if (k == "rho")
      c.rho = parse_density(v);
    else if (k == "count")
      c.count = static_cast<int>(to_integer(k, v));
    else if (k == "seed")
      c.seed = impl::to_seed(k, v);
    else if (k == "erosion") {
      if (v == "connected")
        c.erosion = ErosionMode::Connected;
      else if (v == "post-hoc")
        c.erosion = ErosionMode::PostHoc;
      else
        throw ConfigError("erosion must be 'connected' or 'post-hoc'");
    } else if (k == "max_attempts")
      c.max_attempts = static_cast<int>(to_integer(k, v));
    else if (k == "E")
      c.material.E_s = to_number(k, v);
    else if (k == "nu")
      c.material.nu_s = to_number(k, v);
    else if (k == "void_contrast")
      c.material.void_contrast = to_number(k, v);
    else if (k == "tol")
      c.solver.tol = to_number(k, v);
    else if (k == "max_iter")
      c.solver.max_iter = static_cast<int>(to_integer(k, v));
    else if (k == "preconditioner")
      c.solver.preconditioner = parse_preconditioner(v);
    else if (k == "jacobi_density")
      c.solver.jacobi_density = to_number(k, v);
    else if (k == "jacobi_max_iter")
      c.solver.jacobi_max_iter = static_cast<int>(to_integer(k, v));
    else if (k == "threads")
      c.threads = static_cast<int>(to_integer(k, v));
    else if (k == "out")
      c.out = v;
    else if (k == "csv")
      c.csv = v;
    else if (k == "report")
      c.report = v;
    else if (k == "stats_rho_min")
      c.stats_rho_min = to_number(k, v);
    else if (k == "stats_rho_max")
      c.stats_rho_max = to_number(k, v);
    else {
      impl::set_threshold(c.thresholds, k, to_number(k, v), &known);
      if (!known)
        throw ConfigError("unknown config key '" + k + "'");
    }
  });
  c.check();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

inline nlohmann::ordered_json material_json(const Material& m) {
  return {{"E_s", m.E_s}, {"nu_s", m.nu_s}, {"void_contrast", m.void_contrast}};
}

inline nlohmann::ordered_json thresholds_json(const Thresholds& t) {
  return {{"isotropic_omega", t.isotropic_omega},       {"auxetic_nu", t.auxetic_nu},
          {"optimal_fraction", t.optimal_fraction},     {"anisotropic_z_high", t.anisotropic_z_high},
          {"anisotropic_z_low", t.anisotropic_z_low},   {"pentamode_ratio", t.pentamode_ratio},
          {"pentamode_cos", t.pentamode_cos}};
}

inline nlohmann::ordered_json solver_json(const SolverOptions& s) {
  return {{"method", "matrix-free PCG, trilinear hexahedra, periodic fluctuation"},
          {"tol", s.tol},
          {"max_iter", s.max_iter},
          {"preconditioner", to_string(s.preconditioner)},
          {"jacobi_density", s.jacobi_density},
          {"jacobi_max_iter", s.jacobi_max_iter}};
}

// Generator decisions shared by every container this library writes.
inline nlohmann::ordered_json generator_json(ErosionMode erosion, int max_attempts) {
  return {{"erosion", "orbit-wise, " + std::string(to_string(erosion))},
          {"origin_choice", "2 for 201, 203, 222, 224, 227, 228"},
          {"n_convention", "n^3 voxels per period; voxel (i,j,k) spans [i,i+1)/n"},
          {"min_density", min_dataset_density},
          {"max_attempts", max_attempts}};
}

// Everything that determines the records; threads and paths do not.
inline nlohmann::ordered_json pipeline_metadata(const PipelineConfig& c) {
  nlohmann::ordered_json m;
  m["format"] = "cubatlas dataset";
  m["generator"] = generator_json(c.erosion, c.max_attempts);
  m["material"] = material_json(c.material);
  m["solver"] = solver_json(c.solver);
  m["thresholds"] = thresholds_json(c.thresholds);
  m["plan"] = {{"groups", c.groups},
               {"n", c.n},
               {"rho", c.rho.to_string()},
               {"count", c.count},
               {"seed", c.seed}};
  return m;
}

struct PlanItem {
  int group = 0;
  std::uint64_t seed = 0;
  double rho = 0;
};

inline std::vector<PlanItem> make_plan(const PipelineConfig& c) {
  std::vector<PlanItem> plan;
  const auto fixed = c.rho.values();
  for (int g : c.groups) {
    const std::uint64_t gseed = derive_seed(c.seed, static_cast<std::uint64_t>(g));
    std::uint64_t ordinal = 0;
    if (c.rho.kind == DensitySchedule::Kind::Uniform) {
      for (int i = 0; i != c.count; ++i) {
        PlanItem it{g, derive_seed(gseed, ordinal++), 0};
        SplitMix64 rng(derive_seed(it.seed, 0x72686f));
        it.rho = c.rho.lo + (c.rho.hi - c.rho.lo) * rng.uniform();
        plan.push_back(it);
      }
    } else {
      for (double r : fixed)
        for (int i = 0; i != c.count; ++i)
          plan.push_back({g, derive_seed(gseed, ordinal++), r});
    }
  }
  return plan;
}

inline std::uint32_t validity_bits(const ValidityReport& r) {
  std::uint32_t f = 0;
  f |= r.symmetric ? Symmetric : 0u;
  f |= r.percolates[0] ? PercolatesX : 0u;
  f |= r.percolates[1] ? PercolatesY : 0u;
  f |= r.percolates[2] ? PercolatesZ : 0u;
  f |= r.single_component ? SingleComponent : 0u;
  f |= r.density_ok ? DensityOk : 0u;
  f |= r.valid ? Valid : 0u;
  return f;
}

// Homogenizes, summarizes and classifies one grid into rec. Returns false
// (and sets HomogFailed) when the solver gives up.
inline bool annotate(DatasetRecord& rec, const VoxelGrid& grid, const Material& mat,
                     const SolverOptions& solver, const Thresholds& t, std::string* why = nullptr) {
  try {
    Properties p;
    p.homog = homogenize(grid, mat, solver);
    p.props = summarize({p.homog.C11, p.homog.C12, p.homog.C44}, density(grid), mat, t);
    rec.set_properties(p);
    rec.flags &= ~static_cast<std::uint32_t>(HomogFailed);
    return true;
  } catch (const SolverError& e) {
    if (why)
      *why = e.what();
  } catch (const DegenerateError& e) {
    if (why)
      *why = e.what();
  } catch (const DomainError& e) {
    if (why)
      *why = e.what();
  }
  rec.flags |= HomogFailed;
  return false;
}

struct ItemOutcome {
  DatasetRecord record;
  std::string note;  // empty on success
  double seconds = 0;
};

inline ItemOutcome process_item(const PlanItem& it, const PipelineConfig& c,
                                bool with_properties = true) {
  const auto t0 = std::chrono::steady_clock::now();
  ItemOutcome out;
  DatasetRecord& rec = out.record;
  rec.group_number = static_cast<std::uint16_t>(it.group);
  rec.seed = it.seed;

  GenSpec spec;
  spec.group_number = it.group;
  spec.n = c.n;
  spec.target_density = it.rho;
  spec.seed = it.seed;
  spec.max_attempts = c.max_attempts;
  spec.mode = c.erosion;
  GenResult gen;
  bool generated = true;
  try {
    gen = generate(spec);
  } catch (const GenerationFailure& f) {
    gen = f.last_attempt;
    generated = false;
    out.note = f.what();
  }
  rec.set_grid(gen.grid);
  rec.flags = validity_bits(gen.report);
  if (!generated) {
    rec.flags |= GenerationFailed;
  } else if (with_properties) {
    SolverOptions so = c.solver;
    so.threads = 1;  // the pipeline parallelizes over records
    std::string why;
    if (!annotate(rec, gen.grid, c.material, so, c.thresholds, &why))
      out.note = "homogenization failed: " + why;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---- Kruskal-Wallis summary report --------------------------------------

inline const std::vector<std::string>& report_groupings() {
  static const std::vector<std::string> g = {"space_group", "bravais", "point_group"};
  return g;
}

inline const std::vector<std::string>& report_properties() {
  static const std::vector<std::string> p = {"E_norm", "G_norm", "K_norm", "Z", "nu"};
  return p;
}

inline std::string grouping_title(const std::string& by) {
  if (by == "space_group")
    return "Space Group";
  if (by == "bravais")
    return "Bravais Lattice";
  if (by == "point_group")
    return "Point Group";
  throw ConfigError("unknown grouping '" + by + "' (space_group, bravais, point_group)");
}

// Rows of a property CSV inside [rho_min, rho_max], skipping degenerate
// records and non-finite values.
inline GroupedSample<std::string> sample_from_csv(const CsvTable& t, const std::string& by,
                                                  const std::string& prop, double rho_min,
                                                  double rho_max) {
  grouping_title(by);
  const std::size_t label_col = t.column(by == "space_group" ? "group_number" : by);
  const std::size_t value_col = t.column(prop);
  const std::size_t rho_col = t.column("rho");
  const std::size_t degenerate_col = t.column("degenerate");
  GroupedSample<std::string> s;
  for (std::size_t r = 0; r != t.rows.size(); ++r) {
    const double rho = t.number(r, rho_col);
    if (rho < rho_min || rho > rho_max || t.rows[r][degenerate_col] == "1")
      continue;
    const double v = t.number(r, value_col);
    if (std::isfinite(v))
      s.add(t.rows[r][label_col], v);
  }
  return s;
}

struct ReportRow {
  std::string grouping, property;
  std::optional<TestResult> result;
  std::string note;  // why result is missing
};

inline ReportRow report_row(const CsvTable& t, const std::string& by, const std::string& prop,
                            double rho_min, double rho_max) {
  ReportRow row{by, prop, std::nullopt, {}};
  try {
    row.result = kruskal_wallis(sample_from_csv(t, by, prop, rho_min, rho_max));
  } catch (const DomainError& e) {
    row.note = e.what();
  } catch (const DegenerateError& e) {
    row.note = e.what();
  }
  return row;
}

inline std::vector<ReportRow> report_table(const CsvTable& t, double rho_min, double rho_max) {
  std::vector<ReportRow> rows;
  for (const auto& by : report_groupings())
    for (const auto& prop : report_properties())
      rows.push_back(report_row(t, by, prop, rho_min, rho_max));
  return rows;
}

inline std::string format_p(double p) {
  if (p < 0.001)
    return "p < .001";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << p;
  return os.str();
}

inline std::string format_report(const std::vector<ReportRow>& rows, double rho_min,
                                 double rho_max) {
  std::ostringstream os;
  os << "Kruskal-Wallis tests (alpha = 0.05), rho in [" << format_double(rho_min) << ", "
     << format_double(rho_max) << "]\n";
  os << std::left << std::setw(17) << "Grouping" << std::setw(10) << "Property" << std::right
     << std::setw(12) << "H" << std::setw(6) << "DoF" << std::setw(9) << "N" << std::setw(11)
     << "p" << std::setw(8) << "eps^2" << "  " << "Interpretation\n";
  for (const ReportRow& r : rows) {
    os << std::left << std::setw(17) << grouping_title(r.grouping) << std::setw(10) << r.property
       << std::right;
    if (!r.result) {
      os << "  n/a (" << r.note << ")\n";
      continue;
    }
    const TestResult& x = *r.result;
    os << std::setw(12) << std::fixed << std::setprecision(1) << x.H << std::setw(6) << x.df
       << std::setw(9) << x.n << std::setw(11) << format_p(x.p) << std::setw(8)
       << std::setprecision(2) << x.epsilon_sq_reported << "  " << to_string(x.interpretation) << '\n';
    os.unsetf(std::ios::floatfield);
  }
  return os.str();
}

// ---- driver ----------------------------------------------------------------

struct PipelineSummary {
  std::size_t planned = 0;
  std::size_t resumed = 0;    // already in the output
  std::size_t processed = 0;  // this run
  std::size_t generation_failed = 0;
  std::size_t homog_failed = 0;
  std::size_t with_properties = 0;  // whole dataset
  std::size_t isotropic = 0, auxetic = 0, optimal = 0, pentamode = 0, highly_anisotropic = 0;
  double seconds = 0;
  std::vector<ReportRow> report;

  bool partial_failure() const { return generation_failed + homog_failed > 0; }
};

inline std::pair<int, std::uint64_t> record_key(int group, std::uint64_t seed) {
  return {group, seed};
}

inline PipelineSummary run_pipeline(const PipelineConfig& c, std::ostream* log = nullptr) {
  c.check();
  const auto t0 = std::chrono::steady_clock::now();
  PipelineSummary sum;
  const auto plan = make_plan(c);
  sum.planned = plan.size();
  const auto meta = pipeline_metadata(c);

  DatasetAppender out(c.out, meta);
  if (out.existing().metadata != meta)
    throw ConfigError(c.out.string() + " was written with a different configuration");
  std::set<std::pair<int, std::uint64_t>> done;
  for (const DatasetRecord& r : out.existing().records)
    done.insert(record_key(r.group_number, r.seed));

  std::vector<const PlanItem*> todo;
  for (const PlanItem& it : plan) {
    if (done.count(record_key(it.group, it.seed)))
      ++sum.resumed;
    else
      todo.push_back(&it);
  }

  // Workers pull items in plan order; finished records are appended as soon
  // as every earlier item is finished, so the file order is the plan order.
  std::vector<std::optional<ItemOutcome>> results(todo.size());
  std::size_t next_write = 0;
  std::atomic<std::size_t> next_item{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      {
        std::lock_guard lock(mu);
        if (failure)
          return;
      }
      const std::size_t i = next_item.fetch_add(1);
      if (i >= todo.size())
        return;
      try {
        ItemOutcome o = process_item(*todo[i], c);
        std::lock_guard lock(mu);
        if (log) {
          const PlanItem& it = *todo[i];
          *log << "[" << (sum.resumed + i + 1) << "/" << sum.planned << "] group " << it.group
               << " seed " << it.seed << " rho " << std::fixed << std::setprecision(3) << it.rho
               << " -> " << o.record.achieved_density << " (" << std::setprecision(1)
               << o.seconds << " s)" << (o.note.empty() ? "" : " " + o.note) << '\n';
          log->unsetf(std::ios::floatfield);
          log->flush();
        }
        results[i] = std::move(o);
        std::vector<DatasetRecord> batch;
        while (next_write < results.size() && results[next_write]) {
          ItemOutcome& r = *results[next_write];
          sum.generation_failed += r.record.has(GenerationFailed);
          sum.homog_failed += r.record.has(HomogFailed);
          batch.push_back(std::move(r.record));
          results[next_write].reset();
          ++next_write;
        }
        out.append(batch);
        sum.processed += batch.size();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure)
          failure = std::current_exception();
        return;
      }
    }
  };
  {
    const int workers = std::max(1, std::min<int>(c.worker_count(), static_cast<int>(todo.size())));
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w)
      pool.emplace_back(worker);
    worker();
  }
  if (failure)
    std::rethrow_exception(failure);

  const Dataset ds = read_dataset(c.out);
  for (const DatasetRecord& r : ds.records) {
    if (!r.has(HasProperties))
      continue;
    ++sum.with_properties;
    sum.isotropic += r.has(Isotropic);
    sum.auxetic += r.has(Auxetic);
    sum.optimal += r.has(Optimal);
    sum.pentamode += r.has(Pentamode);
    sum.highly_anisotropic += r.has(HighlyAnisotropic);
  }
  std::stringstream csv;
  export_csv(csv, ds.records);
  {
    std::ofstream f(c.csv_path(), std::ios::trunc);
    if (!f)
      throw IoError(IoError::Kind::Open, "cannot create " + c.csv_path().string());
    f << csv.str();
  }
  const CsvTable table = read_csv(csv);
  sum.report = report_table(table, c.stats_rho_min, c.stats_rho_max);
  {
    std::ofstream f(c.report_path(), std::ios::trunc);
    if (!f)
      throw IoError(IoError::Kind::Open, "cannot create " + c.report_path().string());
    f << format_report(sum.report, c.stats_rho_min, c.stats_rho_max);
    f << "\nstructures with properties: " << sum.with_properties << "\n";
    f << "isotropic " << sum.isotropic << ", auxetic " << sum.auxetic << ", optimal "
      << sum.optimal << ", highly anisotropic " << sum.highly_anisotropic << ", pentamode "
      << sum.pentamode << "\n";
  }
  sum.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sum;
}

} // namespace cubatlas

#endif
