#include "descramble/harness/cli.hpp"

#include "descramble/descrambler.hpp"
#include "descramble/harness/config.hpp"
#include "descramble/harness/report.hpp"
#include "descramble/harness/verification.hpp"
#include "descramble/signal_models.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace descramble::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Matrix read_any(const fs::path& p) {
  return p.extension() == ".csv" ? read_matrix_csv(p) : read_matrix_bin(p);
}

template <class T>
std::vector<T> split_list(const std::string& s, T (*conv)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(conv(item));
  return out;
}

Index to_index(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size() || v <= 0) throw InvalidArgument("bad dimension '" + s + "'");
  return static_cast<Index>(v);
}

Config load_config(const std::string& file, const std::vector<std::string>& sets) {
  Config cfg;
#ifdef DESCRAMBLE_DEFAULT_CONFIG
  if (fs::exists(DESCRAMBLE_DEFAULT_CONFIG)) cfg = Config::load(DESCRAMBLE_DEFAULT_CONFIG);
#endif
  if (!file.empty()) cfg.merge(Config::load(file));
  for (const auto& s : sets) cfg.apply_override(s);
  return cfg;
}

struct GenArgs {
  std::string model = "noise";
  long long n = 1000;
  long long dim = 0;
  double sigma = -1.0;
  double snr = 0.0;
  std::string ilr;
  std::uint64_t seed = 1;
  std::string out;
};

int run_gen(const GenArgs& a) {
  DataModelSpec spec = default_model_spec(parse_model_kind(a.model));
  if (a.dim > 0) {
    spec.dim = a.dim;
    if (spec.kind == ModelKind::kDeer) {
      spec.deer.r_grid = linspace(1.5, 8.0, a.dim);
      spec.deer.t_grid = linspace(0.0, 3.2, a.dim);
    } else if (spec.kind == ModelKind::kBiexp) {
      spec.biexp.times = linspace(0.0, 800.0, a.dim);
    }
  }
  if (a.sigma >= 0.0) spec.sigma = a.sigma;
  spec.validate();
  LabeledBatch b;
  switch (spec.kind) {
    case ModelKind::kNoise:
      b.inputs = sample_noise(spec.dim, a.n, a.seed);
      b.targets = b.inputs;
      break;
    case ModelKind::kOscillatory:
      b.inputs = oscillatory_sample(spec, a.n, a.seed);
      b.targets = b.inputs;
      break;
    case ModelKind::kDeer: {
      const Matrix k = deer_operator(spec.deer.r_grid, spec.deer.t_grid, spec.deer.constants);
      const double sigma = a.snr > 0.0 ? deer_sigma_for_snr(k, spec.deer, a.snr, a.seed ^ 0x5a) : spec.sigma;
      spec.sigma = sigma;
      b = sample_deer(k, spec.deer, a.n, sigma, a.seed);
      break;
    }
    case ModelKind::kBiexp:
      b = sample_biexp(spec, a.n, a.seed);
      if (!a.ilr.empty()) b = ilr_concat(b, parse_ilr_mode(a.ilr));
      break;
  }
  fs::create_directories(a.out);
  write_matrix_bin(b.inputs, fs::path(a.out) / "inputs.bin");
  write_matrix_bin(b.targets, fs::path(a.out) / "targets.bin");
  json meta = {{"model", to_string(spec.kind)}, {"n", a.n}, {"dim", b.inputs.rows()},
               {"sigma", spec.sigma},          {"seed", a.seed}};
  if (!a.ilr.empty()) meta["ilr"] = a.ilr;
  std::ofstream(fs::path(a.out) / "data.json") << meta.dump(2) << '\n';
  std::printf("wrote %lld samples of dimension %lld to %s\n", static_cast<long long>(b.inputs.cols()),
              static_cast<long long>(b.inputs.rows()), a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string data, arch, act, optimizer = "adam", out;
  bool renorm = false;
  int epochs = 10;
  double lr = 1e-3;
  long long batch = 64;
  std::uint64_t seed = 1;
};

int run_train(const TrainArgs& a) {
  const Matrix x = read_matrix_bin(fs::path(a.data) / "inputs.bin");
  const Matrix y = read_matrix_bin(fs::path(a.data) / "targets.bin");
  NetArch arch;
  arch.dims = split_list<Index>(a.arch, to_index);
  arch.activations = split_list<Activation>(a.act, parse_activation);
  arch.renormalize_output = a.renorm;
  if (arch.dims.size() < 2 || arch.dims.front() != x.rows() || arch.dims.back() != y.rows())
    throw InvalidArgument("--arch must start at the input dimension (" + std::to_string(x.rows()) +
                          ") and end at the target dimension (" + std::to_string(y.rows()) + ")");
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.learning_rate = a.lr;
  tc.batch_size = a.batch;
  tc.seed = a.seed;
  if (a.optimizer == "sgd") tc.optimizer = Optimizer::kSgd;
  else if (a.optimizer != "adam") throw InvalidArgument("--optimizer must be adam or sgd");
  const TrainResult tr = train(init_net(arch, a.seed ^ 0x1417), x, y, tc);
  save_net(tr.net, a.out);
  std::ofstream loss(fs::path(a.out) / "loss.csv");
  loss << "epoch,rmse\n0," << tr.initial_loss << '\n';
  for (std::size_t e = 0; e < tr.loss.size(); ++e) loss << e + 1 << ',' << tr.loss[e] << '\n';
  std::printf("initial rmse %.6g, final rmse %.6g%s\n", tr.initial_loss,
              tr.loss.empty() ? tr.initial_loss : tr.loss.back(), tr.diverged ? " (diverged)" : "");
  return tr.diverged ? 1 : 0;
}

struct DescrambleArgs {
  std::string net, data, method = "closed", stencil = "fourier", boundary = "periodic", out;
  long long layer = 1, probe = 2000;
  int fd_order = 1;
  std::uint64_t seed = 1;
};

int run_descramble(const DescrambleArgs& a) {
  const FeedForwardNet net = load_net(a.net);
  if (a.layer < 1 || a.layer > static_cast<long long>(net.depth()))
    throw InvalidArgument("--layer must be in 1.." + std::to_string(net.depth()));
  // Without data, probe the network with isotropic noise.
  const Matrix x = a.data.empty() ? sample_noise(net.input_dim(), a.probe, a.seed)
                                  : read_matrix_bin(fs::path(a.data) / "inputs.bin");
  const Matrix& w = net.layers[static_cast<std::size_t>(a.layer - 1)].weight;
  StencilSpec s;
  s.kind = parse_stencil_kind(a.stencil);
  s.size = w.rows();
  s.fd_order = a.fd_order;
  s.fd_boundary = parse_fd_boundary(a.boundary);
  const Matrix d = make_stencil(s);
  const Method m = parse_method(a.method);
  DescrambleReport rep;
  if (m == Method::kMds) rep = mds_descrambler(w);
  else if (m == Method::kJacobian) rep = descramble_jacobian(net, a.layer, x, d);
  else rep = descramble_layer(net, a.layer, x, d, m);
  write_report(rep, a.out, &w);
  std::printf("method %s, objective %.10g, rank %lld%s\n", to_string(rep.method).c_str(), rep.objective,
              static_cast<long long>(rep.rank_used), rep.diagnostics.degenerate ? ", degenerate" : "");
  return 0;
}

int run_svd_report(const std::string& file, long long top, const std::string& out) {
  const Matrix a = read_any(file);
  const EconSVD svd = econ_svd(a);
  const Vector s = singular_values(a);
  std::printf("shape %lld x %lld, numerical rank %lld, admissible %s\n", static_cast<long long>(a.rows()),
              static_cast<long long>(a.cols()), static_cast<long long>(svd.rank()),
              is_admissible(a) ? "yes" : "no");
  std::printf("eigengap of A A^T: %.6g\n", eigengap(a * a.transpose()));
  for (Index i = 0; i < std::min<Index>(s.size(), top); ++i) std::printf("s[%lld] = %.10g\n", static_cast<long long>(i), s(i));
  if (!out.empty()) {
    Table t{{"index", "singular_value"}, {}};
    for (Index i = 0; i < s.size(); ++i) t.add({double(i), s(i)});
    write_table_csv(t, out);
  }
  return 0;
}

int run_fourier_view(const std::string& file, const std::string& p_file, const std::string& out) {
  Matrix a = read_any(file);
  if (!p_file.empty()) {
    const Matrix p = read_any(p_file);
    if (p.cols() != a.rows()) throw InvalidArgument("descrambler columns do not match matrix rows");
    a = p * a;
  }
  const Matrix f = dft2_magnitude(a);
  fs::create_directories(out);
  write_matrix_csv(f, fs::path(out) / "fourier_view.csv");
  write_heatmap_svg(f, "2-D DFT magnitude", fs::path(out) / "fourier_view.svg");
  write_heatmap_svg(a, "matrix", fs::path(out) / "matrix.svg");
  std::printf("wrote %s\n", (fs::path(out) / "fourier_view.csv").c_str());
  return 0;
}

struct VerifyArgs {
  std::string name, config, out = "verify_out";
  std::vector<std::string> sets;
  bool quick = false;
};

int run_verify(const VerifyArgs& a) {
  const Config cfg = load_config(a.config, a.sets);
  std::vector<const NamedVerifier*> todo;
  if (a.name == "all") {
    for (const auto& v : verification_registry()) todo.push_back(&v);
  } else if (const NamedVerifier* v = find_verifier(a.name)) {
    todo.push_back(v);
  } else {
    std::string names;
    for (const auto& v : verification_registry()) names += " " + v.name;
    std::fprintf(stderr, "unknown verification '%s'; available: all%s\n", a.name.c_str(), names.c_str());
    return 2;
  }
  std::vector<VerificationResult> results;
  for (const NamedVerifier* v : todo) {
    std::fprintf(stderr, "running %s ...\n", v->name.c_str());
    results.push_back(run_verification(*v, cfg, a.out, a.quick));
    std::fputs(format_result_table({results.back()}).c_str(), stdout);
    std::fflush(stdout);
  }
  write_suite_summary(results, a.out, a.quick);
  const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.ok(); });
  std::printf("%s: %zu experiment(s), %s\n", a.out.c_str(), results.size(), ok ? "all passed" : "FAILURES");
  return ok ? 0 : 1;
}

int run_report(const std::string& dir) {
  const fs::path root(dir);
  std::vector<json> runs;
  if (fs::exists(root / "summary.json")) {
    std::ifstream in(root / "summary.json");
    const json j = json::parse(in);
    if (j.contains("experiments"))
      for (const auto& e : j["experiments"]) runs.push_back(e);
    else
      runs.push_back(j);
  } else {
    for (const auto& entry : fs::directory_iterator(root))
      if (fs::exists(entry.path() / "summary.json")) {
        std::ifstream in(entry.path() / "summary.json");
        runs.push_back(json::parse(in));
      }
  }
  if (runs.empty()) throw FormatError("no summary.json found under " + dir);
  bool ok = true;
  for (const auto& r : runs) {
    std::printf("%-10s %s\n", r.value("name", std::string("?")).c_str(), r.value("ok", false) ? "PASS" : "FAIL");
    ok = ok && r.value("ok", false);
    for (const auto& c : r["checks"]) {
      const double m = c["measured"].is_null() ? std::nan("") : c["measured"].get<double>();
      std::printf("    [%s] %-7s %-62s %12.5g\n", c.value("ok", false) ? "ok" : "!!",
                  c.value("role", std::string()).c_str(), c.value("description", std::string()).substr(0, 62).c_str(), m);
    }
  }
  return ok ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Descrambling transforms for trained neural network layers"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "sample a training set from a signal model");
  g->add_option("--model", gen.model, "noise | oscillatory | deer | biexp")->capture_default_str();
  g->add_option("--n", gen.n, "number of samples")->capture_default_str();
  g->add_option("--dim", gen.dim, "signal dimension (grid size)");
  g->add_option("--sigma", gen.sigma, "noise standard deviation");
  g->add_option("--snr", gen.snr, "DEER only: pick sigma for this SNR");
  g->add_option("--ilr", gen.ilr, "biexp only: nd_nd | nd_reg input concatenation");
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a feed-forward network on a generated data set");
  t->add_option("--data", tr.data, "directory written by gen")->required();
  t->add_option("--arch", tr.arch, "comma separated layer widths, e.g. 256,80,256")->required();
  t->add_option("--act", tr.act, "comma separated activations, one per layer")->required();
  t->add_flag("--renorm", tr.renorm, "clip and renormalize outputs to unit sum");
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  t->add_option("--optimizer", tr.optimizer)->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--out", tr.out, "network directory")->required();

  DescrambleArgs ds;
  auto* d = app.add_subcommand("descramble", "compute the descrambler of a layer");
  d->add_option("--net", ds.net, "network directory")->required();
  d->add_option("--layer", ds.layer, "1-based layer index")->capture_default_str();
  d->add_option("--data", ds.data, "data directory (default: isotropic noise probe)");
  d->add_option("--probe", ds.probe, "noise probe size when --data is absent")->capture_default_str();
  d->add_option("--method", ds.method, "closed | manifold | jacobian | mds")->capture_default_str();
  d->add_option("--stencil", ds.stencil, "fourier | fd")->capture_default_str();
  d->add_option("--fd-order", ds.fd_order)->capture_default_str();
  d->add_option("--fd-boundary", ds.boundary, "periodic | one-sided")->capture_default_str();
  d->add_option("--seed", ds.seed)->capture_default_str();
  d->add_option("--out", ds.out, "report directory")->required();

  std::string svd_file, svd_out;
  long long svd_top = 10;
  auto* s = app.add_subcommand("svd-report", "singular values and admissibility of a matrix");
  s->add_option("--matrix", svd_file, "matrix file (.bin or .csv)")->required();
  s->add_option("--top", svd_top)->capture_default_str();
  s->add_option("--out", svd_out, "optional CSV of all singular values");

  std::string fv_file, fv_p, fv_out;
  auto* f = app.add_subcommand("fourier-view", "2-D DFT magnitude of a (descrambled) matrix");
  f->add_option("--matrix", fv_file, "matrix file (.bin or .csv)")->required();
  f->add_option("--descrambler", fv_p, "optional P applied on the left first");
  f->add_option("--out", fv_out, "output directory")->required();

  VerifyArgs va;
  auto* v = app.add_subcommand("verify", "run a verification experiment (or all)");
  v->add_option("name", va.name, "experiment name or 'all'")->required();
  v->add_flag("--quick", va.quick, "reduced sample sizes and epochs");
  v->add_option("--config", va.config, "config file layered over the defaults");
  v->add_option("--set", va.sets, "override, key=value (repeatable)");
  v->add_option("--out", va.out, "output directory")->capture_default_str();

  std::string rep_dir;
  auto* r = app.add_subcommand("report", "print the summary of a verification run");
  r->add_option("--dir", rep_dir, "directory written by verify")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return run_gen(gen);
    if (*t) return run_train(tr);
    if (*d) return run_descramble(ds);
    if (*s) return run_svd_report(svd_file, svd_top, svd_out);
    if (*f) return run_fourier_view(fv_file, fv_p, fv_out);
    if (*v) return run_verify(va);
    if (*r) return run_report(rep_dir);
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace descramble::harness
