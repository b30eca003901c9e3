// cubatlas command line: gen, homog, props, classify, stats, export,
// pipeline, symgroup info.
//
// Exit codes: 0 success, 1 failures (some records or a fatal I/O error),
// 2 configuration or usage error. CUBATLAS_THREADS sets the thread count.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cubatlas/blas_guard.hpp"
#include "cubatlas/dataset.hpp"
#include "cubatlas/elastica.hpp"
#include "cubatlas/genesis.hpp"
#include "cubatlas/homog.hpp"
#include "cubatlas/parallel.hpp"
#include "cubatlas/pipeline.hpp"
#include "cubatlas/stats.hpp"
#include "cubatlas/symgroup.hpp"

namespace fs = std::filesystem;
using namespace cubatlas;

namespace {

constexpr int exit_ok = 0, exit_partial = 1, exit_config = 2;

// "E=205000,nu=0.29[,void=1e-9]"
Material parse_material(const std::string& text) {
  Material m;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("material: expected key=value, got '" + item + "'");
    const std::string k = impl::trim(item.substr(0, eq)), v = impl::trim(item.substr(eq + 1));
    if (k == "E")
      m.E_s = impl::to_number(k, v);
    else if (k == "nu")
      m.nu_s = impl::to_number(k, v);
    else if (k == "void")
      m.void_contrast = impl::to_number(k, v);
    else
      throw ConfigError("material: unknown key '" + k + "' (E, nu, void)");
  }
  try {
    m.check();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return m;
}

Material material_from(const Dataset& ds) {
  Material m;
  if (ds.metadata.contains("material")) {
    const auto& j = ds.metadata["material"];
    m.E_s = j.value("E_s", m.E_s);
    m.nu_s = j.value("nu_s", m.nu_s);
    m.void_contrast = j.value("void_contrast", m.void_contrast);
  }
  return m;
}

Thresholds load_thresholds(const std::string& path) {
  if (path.empty())
    return {};
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open thresholds file " + path);
  return parse_thresholds(in);
}

// Recomputes descriptors and class flags from the stored stiffness.
void reclassify(DatasetRecord& r, const Material& m, const Thresholds& t) {
  Properties p = r.get_properties();
  p.props = summarize({p.homog.C11, p.homog.C12, p.homog.C44}, p.props.rho, m, t);
  r.set_properties(p);
}

bool matches(const DatasetRecord& r, const std::string& cls) {
  if (!r.has(HasProperties))
    return false;
  if (cls == "pentamode")
    return r.has(Pentamode);
  if (cls == "auxetic")
    return r.has(Auxetic);
  if (cls == "optimal")
    return r.has(Optimal);
  if (cls == "isotropic")
    return r.has(Isotropic);
  if (cls == "iso-auxetic")
    return r.has(Isotropic) && r.has(Auxetic);
  if (cls == "anisotropic")
    return r.has(HighlyAnisotropic);
  throw ConfigError("unknown class '" + cls + "'");
}

void write_csv_file(const std::string& path, std::span<const DatasetRecord> records) {
  CsvReport rep;
  if (path.empty() || path == "-") {
    rep = export_csv(std::cout, records);
  } else {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
      throw IoError(IoError::Kind::Open, "cannot create " + path);
    rep = export_csv(out, records);
  }
  if (rep.skipped)
    std::cerr << "warning: skipped " << rep.skipped << " record(s) without properties\n";
  std::cerr << rep.rows << " row(s)\n";
}

int print_group(int number) {
  const SpaceGroup& g = group(number);
  std::cout << g.number << "  " << g.hm_symbol << "  Bravais " << to_string(g.bravais)
            << "  point group " << to_string(g.point_group) << "  order " << g.order();
  if (g.origin_choice != 1)
    std::cout << "  origin choice " << g.origin_choice;
  std::cout << '\n';
  return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
  ensure_usable_blas(argv);

  CLI::App app{"Cubic space-group voxel metamaterials: generation, homogenization, statistics"};
  app.require_subcommand(1);

  // symgroup info
  auto* sg = app.add_subcommand("symgroup", "Space-group tables");
  auto* sg_info = sg->add_subcommand("info", "Print symbol, Bravais lattice, point group, order");
  std::string sg_which;
  sg_info->add_option("number", sg_which, "195..230 or all")->required();
  sg->require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate structures into a dataset container");
  std::string gen_groups = "all", gen_rho = "0.3", gen_out, gen_erosion = "connected";
  int gen_n = 64, gen_count = 1, gen_attempts = 20;
  std::uint64_t gen_seed = 1;
  gen->add_option("--group", gen_groups, "195..230, a list/range like 195-206,221, or all");
  gen->add_option("--n", gen_n, "voxels per edge (multiple of 4)");
  gen->add_option("--rho", gen_rho, "0.3, lo:hi:step, or 'uniform lo hi'");
  gen->add_option("--count", gen_count, "structures per group and density");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--erosion", gen_erosion, "connected or post-hoc");
  gen->add_option("--max-attempts", gen_attempts);
  gen->add_option("--out", gen_out)->required();

  // homog
  auto* hom = app.add_subcommand("homog", "Homogenize the records of a dataset");
  std::string hom_in, hom_out, hom_material = "E=205000,nu=0.29", hom_pc = "auto",
                               hom_thresholds;
  double hom_tol = 1e-6;
  int hom_max_iter = 0;
  hom->add_option("--in", hom_in)->required();
  hom->add_option("--out", hom_out, "defaults to --in (annotate in place)");
  hom->add_option("--material", hom_material, "E=...,nu=...[,void=...]");
  hom->add_option("--tol", hom_tol);
  hom->add_option("--max-iter", hom_max_iter, "0 -> 10 n");
  hom->add_option("--preconditioner", hom_pc, "auto, jacobi or cholesky");
  hom->add_option("--thresholds", hom_thresholds, "classification thresholds file");

  // props
  auto* props = app.add_subcommand("props", "Write one property row per structure");
  std::string props_in, props_out = "-", props_thresholds;
  props->add_option("--in", props_in)->required();
  props->add_option("--out", props_out, "CSV path, - for stdout");
  props->add_option("--thresholds", props_thresholds);

  // classify
  auto* cls = app.add_subcommand("classify", "List records of one extreme family");
  std::string cls_in, cls_list, cls_out = "-", cls_thresholds;
  cls->add_option("--in", cls_in)->required();
  cls->add_option("--list", cls_list, "pentamode, auxetic, optimal, isotropic, iso-auxetic, anisotropic")
      ->required();
  cls->add_option("--out", cls_out, "CSV path, - for stdout");
  cls->add_option("--thresholds", cls_thresholds);

  // stats
  auto* st = app.add_subcommand("stats", "Kruskal-Wallis test over a property CSV");
  std::string st_in, st_by = "space_group", st_prop = "E_norm", st_plot;
  double st_rho_min = 0.05, st_rho_max = 0.2;
  std::optional<std::uint64_t> st_balance;
  int st_perms = 0;
  std::uint64_t st_perm_seed = 1;
  st->add_option("--in", st_in)->required();
  st->add_option("--by", st_by, "space_group, bravais, point_group, or all");
  st->add_option("--prop", st_prop, "E_norm, G_norm, K_norm, Z, nu, any CSV column, or all");
  st->add_option("--rho-min", st_rho_min);
  st->add_option("--rho-max", st_rho_max);
  st->add_option("--balance", st_balance, "down-sample every group to the smallest, with this seed");
  st->add_option("--permutations", st_perms, "Monte-Carlo permutation p-value (n < 50)");
  st->add_option("--perm-seed", st_perm_seed);
  st->add_option("--plot-data", st_plot, "write label,value rows of the tested sample");

  // export
  auto* ex = app.add_subcommand("export", "Write raw u8 voxel tensors with JSON sidecars");
  std::string ex_in, ex_dir, ex_conv = "n_plus_1";
  bool ex_props_only = false;
  ex->add_option("--in", ex_in)->required();
  ex->add_option("--out", ex_dir, "output directory")->required();
  ex->add_option("--convention", ex_conv, "n or n_plus_1");
  ex->add_flag("--with-properties-only", ex_props_only);

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "gen -> homog -> props -> classify -> stats, resumable");
  std::string pl_config, pl_out;
  int pl_threads = 0;
  pl->add_option("--config", pl_config)->required();
  pl->add_option("--out", pl_out, "overrides the config's out");
  pl->add_option("--threads", pl_threads, "overrides the config and CUBATLAS_THREADS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (*sg_info) {
      if (sg_which == "all") {
        for (int g = first_cubic_group; g <= last_cubic_group; ++g)
          print_group(g);
        return exit_ok;
      }
      int number = 0;
      try {
        number = std::stoi(sg_which);
        check_group_number(number);
      } catch (const std::exception&) {
        throw ConfigError("not a cubic space group: " + sg_which);
      }
      return print_group(number);
    }

    if (*gen) {
      PipelineConfig c;
      c.groups = parse_groups(gen_groups);
      c.n = gen_n;
      c.rho = parse_density(gen_rho);
      c.count = gen_count;
      c.seed = gen_seed;
      c.max_attempts = gen_attempts;
      if (gen_erosion == "post-hoc")
        c.erosion = ErosionMode::PostHoc;
      else if (gen_erosion != "connected")
        throw ConfigError("--erosion must be connected or post-hoc");
      c.check();
      const auto plan = make_plan(c);
      Dataset ds;
      ds.metadata["format"] = "cubatlas dataset";
      ds.metadata["generator"] = generator_json(c.erosion, c.max_attempts);
      ds.metadata["plan"] = pipeline_metadata(c)["plan"];
      ds.records.resize(plan.size());
      std::vector<std::string> notes(plan.size());
      parallel_for(plan.size(), default_threads(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i != e; ++i) {
          ItemOutcome o = process_item(plan[i], c, false);
          ds.records[i] = std::move(o.record);
          notes[i] = std::move(o.note);
        }
      });
      std::size_t failed = 0;
      for (std::size_t i = 0; i != plan.size(); ++i)
        if (!notes[i].empty()) {
          ++failed;
          std::cerr << "group " << plan[i].group << " seed " << plan[i].seed << ": " << notes[i] << '\n';
        }
      write_dataset(gen_out, ds);
      std::cerr << ds.records.size() << " record(s), " << failed << " failed\n";
      return failed ? exit_partial : exit_ok;
    }

    if (*hom) {
      Dataset ds = read_dataset(hom_in);
      SolverOptions so;
      so.tol = hom_tol;
      so.max_iter = hom_max_iter;
      so.preconditioner = parse_preconditioner(hom_pc);
      const Material m = parse_material(hom_material);
      const Thresholds t = load_thresholds(hom_thresholds);
      std::vector<std::string> notes(ds.records.size());
      parallel_for(ds.records.size(), default_threads(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i != e; ++i) {
          DatasetRecord& r = ds.records[i];
          if (r.has(GenerationFailed))
            continue;
          annotate(r, r.grid(), m, so, t, &notes[i]);
        }
      });
      std::size_t failed = 0;
      for (std::size_t i = 0; i != notes.size(); ++i)
        if (ds.records[i].has(HomogFailed)) {
          ++failed;
          std::cerr << "record " << i << ": " << notes[i] << '\n';
        }
      ds.metadata["material"] = material_json(m);
      ds.metadata["solver"] = solver_json(so);
      ds.metadata["thresholds"] = thresholds_json(t);
      write_dataset(hom_out.empty() ? hom_in : hom_out, ds);
      std::cerr << ds.records.size() - failed << " homogenized, " << failed << " failed\n";
      return failed ? exit_partial : exit_ok;
    }

    if (*props) {
      Dataset ds = read_dataset(props_in);
      const Thresholds t = load_thresholds(props_thresholds);
      const Material m = material_from(ds);
      for (DatasetRecord& r : ds.records)
        if (r.has(HasProperties))
          reclassify(r, m, t);
      write_csv_file(props_out, ds.records);
      return exit_ok;
    }

    if (*cls) {
      Dataset ds = read_dataset(cls_in);
      const Thresholds t = load_thresholds(cls_thresholds);
      const Material m = material_from(ds);
      std::vector<DatasetRecord> hits;
      for (DatasetRecord& r : ds.records) {
        if (r.has(HasProperties) && !cls_thresholds.empty())
          reclassify(r, m, t);
        if (matches(r, cls_list))
          hits.push_back(r);
      }
      write_csv_file(cls_out, hits);
      return exit_ok;
    }

    if (*st) {
      std::ifstream in(st_in);
      if (!in)
        throw IoError(IoError::Kind::Open, "cannot open " + st_in);
      const CsvTable table = read_csv(in);
      if (st_by == "all" && st_prop == "all") {
        std::cout << format_report(report_table(table, st_rho_min, st_rho_max), st_rho_min,
                                   st_rho_max);
        return exit_ok;
      }
      const std::vector<std::string> bys =
          st_by == "all" ? report_groupings() : std::vector<std::string>{st_by};
      const std::vector<std::string> ps =
          st_prop == "all" ? report_properties() : std::vector<std::string>{st_prop};
      std::vector<ReportRow> rows;
      std::ofstream plot;
      if (!st_plot.empty()) {
        plot.open(st_plot, std::ios::trunc);
        if (!plot)
          throw IoError(IoError::Kind::Open, "cannot create " + st_plot);
        plot << "grouping,property,label,value\n";
      }
      for (const auto& by : bys)
        for (const auto& p : ps) {
          GroupedSample<std::string> s = sample_from_csv(table, by, p, st_rho_min, st_rho_max);
          if (st_balance)
            s = balance(s, *st_balance);
          ReportRow row{by, p, std::nullopt, {}};
          try {
            row.result = kruskal_wallis(s);
          } catch (const DegenerateError& e) {
            row.note = e.what();
          } catch (const DomainError& e) {
            row.note = e.what();
          }
          rows.push_back(row);
          if (plot)
            for (std::size_t i = 0; i != s.size(); ++i)
              plot << by << ',' << p << ',' << s.labels[i] << ',' << format_double(s.values[i]) << '\n';
          if (st_perms > 0 && row.result)
            std::cout << "permutation p (" << grouping_title(by) << ", " << p << ", " << st_perms
                      << " shuffles, seed " << st_perm_seed
                      << "): " << format_double(permutation_p(s, st_perms, st_perm_seed)) << '\n';
        }
      std::cout << format_report(rows, st_rho_min, st_rho_max);
      if (st_balance)
        std::cout << "balanced by down-sampling to the smallest group, seed " << *st_balance << '\n';
      return exit_ok;
    }

    if (*ex) {
      const Dataset ds = read_dataset(ex_in);
      TensorConvention conv;
      if (ex_conv == "n")
        conv = TensorConvention::N;
      else if (ex_conv == "n_plus_1")
        conv = TensorConvention::NPlus1;
      else
        throw ConfigError("--convention must be n or n_plus_1");
      fs::create_directories(ex_dir);
      std::size_t written = 0;
      for (std::size_t i = 0; i != ds.records.size(); ++i) {
        const DatasetRecord& r = ds.records[i];
        if (r.has(GenerationFailed) || (ex_props_only && !r.has(HasProperties)))
          continue;
        char stem[64];
        std::snprintf(stem, sizeof stem, "%06zu_g%u", i, static_cast<unsigned>(r.group_number));
        write_tensor(fs::path(ex_dir) / stem, export_tensor(r, conv));
        ++written;
      }
      std::cerr << written << " tensor(s) written to " << ex_dir << '\n';
      return exit_ok;
    }

    if (*pl) {
      PipelineConfig c = load_config(pl_config);
      if (!pl_out.empty())
        c.out = pl_out;
      if (pl_threads > 0)
        c.threads = pl_threads;
      const PipelineSummary s = run_pipeline(c, &std::cerr);
      std::cout << format_report(s.report, c.stats_rho_min, c.stats_rho_max);
      std::cout << "planned " << s.planned << ", resumed " << s.resumed << ", processed "
                << s.processed << ", generation failures " << s.generation_failed
                << ", homogenization failures " << s.homog_failed << "\n";
      std::cout << "with properties " << s.with_properties << ": isotropic " << s.isotropic
                << ", auxetic " << s.auxetic << ", optimal " << s.optimal << ", highly anisotropic "
                << s.highly_anisotropic << ", pentamode " << s.pentamode << "\n";
      std::cout << "wall time " << std::fixed << std::setprecision(1) << s.seconds << " s with "
                << c.worker_count() << " worker(s)\n";
      return s.partial_failure() ? exit_partial : exit_ok;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_partial;
  }
  return exit_ok;
}
