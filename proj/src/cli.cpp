#include "dppvfx/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dppvfx/acceptance.hpp"
#include "dppvfx/errors.hpp"
#include "dppvfx/kdpp.hpp"
#include "dppvfx/oracle.hpp"
#include "dppvfx/sampler.hpp"
#include "dppvfx/scaling.hpp"
#include "dppvfx/synthetic.hpp"

namespace dppvfx {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kDictionaryStream = 0;
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kDataStream = 10;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Options {
  std::string kernel_path;
  std::string points_path;
  std::string synthetic;
  double sigma = 0.0;
  bool strict_symmetry = false;

  Index m = 0;
  std::string m_policy = "practical";
  double qbar_b = 3.0;
  double qbar_d = 3.0;
  bool refine = false;
  std::string q = "auto";
  std::uint64_t seed = 0;
  Index num_samples = 1;
  Index k = 0;
  std::string sketch_in;
  std::string sketch_out;
  std::string out;
  bool debug_accept = false;
  bool no_auto_double = false;
  std::uint64_t max_rejections = 1000;
  bool naive_accept = false;
  bool exact = false;

  // validate
  bool quick = false;
  std::vector<int> only;
  std::string inject_fault;

  // bench
  std::vector<Index> sizes{1000, 10000, 50000};
  Index dim = 784;
  Index clusters = 10;
  Index resamples = 200;
};

struct SyntheticSpec {
  Index n, d, clusters;
};

SyntheticSpec parse_synthetic(const std::string& text) {
  SyntheticSpec spec{};
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> spec.n >> c1 >> spec.d >> c2 >> spec.clusters) || c1 != ',' || c2 != ',' || !in.eof()) {
    throw InvalidInput("--synthetic expects n,d,clusters, got '" + text + "'");
  }
  if (spec.n < 1 || spec.d < 1 || spec.clusters < 1) throw InvalidInput("--synthetic sizes must be positive");
  return spec;
}

QPolicy parse_q(const std::string& text) {
  if (text == "auto") return QPolicy::guaranteed();
  std::size_t used = 0;
  double q = 0.0;
  try {
    q = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(q > 0.0) || !std::isfinite(q)) {
    throw InvalidInput("--q expects 'auto' or a positive number, got '" + text + "'");
  }
  return QPolicy::manual(q);
}

PsdKernel load_kernel(const Options& o) {
  const int sources = !o.kernel_path.empty() + !o.points_path.empty() + !o.synthetic.empty();
  if (sources != 1) throw InvalidInput("exactly one of --kernel, --points, --synthetic is required");
  if (o.sigma < 0.0 || !std::isfinite(o.sigma)) throw InvalidInput("--sigma must be positive");
  if (!o.kernel_path.empty()) {
    if (o.sigma > 0.0) throw InvalidInput("--sigma applies to point clouds only");
    return load_dense_kernel(o.kernel_path, sniff_kernel_format(o.kernel_path),
                             o.strict_symmetry ? SymmetryPolicy::strict : SymmetryPolicy::average);
  }
  std::shared_ptr<const PointCloud> cloud;
  if (!o.points_path.empty()) {
    cloud = std::make_shared<const PointCloud>(load_point_cloud(o.points_path));
  } else {
    const SyntheticSpec spec = parse_synthetic(o.synthetic);
    Philox rng(o.seed, kDataStream);
    cloud = std::make_shared<const PointCloud>(gaussian_blobs(BlobSpec{spec.n, spec.d, spec.clusters, 2.0, 1.0}, rng));
  }
  const double sigma = o.sigma > 0.0 ? o.sigma : default_sigma(cloud->dim());
  return PsdKernel::rbf(std::move(cloud), sigma);
}

IndexSequence choose_dictionary(const PsdKernel& kernel, const Options& o, Philox& rng) {
  const Index n = kernel.size();
  RlsConfig config;
  config.qbar_b = o.qbar_b;
  config.qbar_d = o.qbar_d;
  config.seed = o.seed;
  config.refine_bootstrap = o.refine;
  if (o.m > 0) {
    if (o.m > n) throw InvalidInput("--m exceeds n = " + std::to_string(n));
    config.m_cap = o.m;
    return build_dictionary(kernel, config, rng).indices;
  }
  if (o.m_policy == "full") {
    IndexSequence all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    return all;
  }
  const Vector scores = bootstrap_leverage(kernel, config, rng);
  const double d_hat = std::max(scores.sum(), 1.0);
  const double log_n = std::log(std::max<double>(static_cast<double>(n), 2.0));
  double qbar = o.qbar_d;
  double m_cap = 10.0 * std::ceil(d_hat);
  if (o.m_policy == "guaranteed") {
    m_cap = std::ceil(d_hat * d_hat * d_hat * log_n);
    qbar = std::max(qbar, d_hat * d_hat * log_n);
  }
  const auto cap = static_cast<Index>(std::min<double>(m_cap, static_cast<double>(n)));
  return resample_dictionary(kernel, scores, qbar, cap, rng).indices;
}

/// A loaded sketch must reproduce the kernel on its own dictionary.
void check_sketch_matches(const PsdKernel& kernel, const NystromSketch& sketch) {
  if (sketch.n() != kernel.size()) {
    throw InvalidInput("sketch has n = " + std::to_string(sketch.n()) + " but the kernel has n = " +
                       std::to_string(kernel.size()));
  }
  check_indices(sketch.dictionary(), kernel.size(), "sketch dictionary index");
  const Matrix lc = kernel.block(sketch.dictionary(), sketch.dictionary());
  Matrix rows(sketch.m(), sketch.m());
  for (Index a = 0; a < sketch.m(); ++a) rows.row(a) = sketch.factor().row(sketch.dictionary()[a]);
  const double diff = (rows * rows.transpose() - lc).cwiseAbs().maxCoeff();
  if (diff > 1e-6 * std::max(1.0, lc.cwiseAbs().maxCoeff())) {
    throw InvalidInput("sketch does not match the kernel (max deviation " + std::to_string(diff) + " on the dictionary)");
  }
}

struct Pipeline {
  PsdKernel kernel;
  std::optional<VfxSampler> sampler;
  double sketch_build_seconds = 0.0;
  double precompute_seconds = 0.0;
};

Pipeline prepare(const Options& o) {
  Pipeline p{load_kernel(o), std::nullopt, 0.0, 0.0};
  const QPolicy policy = parse_q(o.q);
  const auto start = Clock::now();
  Philox rng(o.seed, kDictionaryStream);
  if (p.kernel.diagonal().maxCoeff() <= 0.0) {
    if (!o.sketch_in.empty()) throw InvalidInput("zero kernel cannot be paired with a sketch");
    p.sampler.emplace(VfxSampler::build(p.kernel, RlsConfig{}, policy, rng));
    p.precompute_seconds = seconds_since(start);
    return p;
  }
  std::optional<NystromSketch> sketch;
  if (!o.sketch_in.empty()) {
    sketch.emplace(load_sketch(o.sketch_in));
    check_sketch_matches(p.kernel, *sketch);
  } else {
    sketch.emplace(NystromSketch::build(p.kernel, choose_dictionary(p.kernel, o, rng)));
    p.sketch_build_seconds = seconds_since(start);
  }
  if (!o.sketch_out.empty()) save_sketch(o.sketch_out, *sketch);
  p.sampler.emplace(p.kernel, std::move(*sketch), policy);
  p.precompute_seconds = seconds_since(start);
  return p;
}

SamplerLimits limits_from(const Options& o, std::ostream& err) {
  SamplerLimits limits;
  limits.max_rejections = o.max_rejections;
  limits.auto_double = !o.no_auto_double;
  limits.naive_accept = o.naive_accept;
  if (o.debug_accept) {
    limits.on_proposal = [&err](const ProposalDraw& d) {
      err << json{{"t", d.t}, {"log_accept", d.log_accept}, {"accepted", d.accepted}}.dump() << '\n';
    };
  }
  return limits;
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    file_.open(path, std::ios::binary);
    if (!file_) throw InvalidInput("cannot open " + path + " for writing");
    stream_ = &file_;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

json sample_line(const DppSubset& s) {
  return json{{"sample", s.members}, {"rejections", s.rejections}, {"t", s.t_final}};
}

void require_samples(const Options& o) {
  if (o.num_samples < 1) throw InvalidInput("--num-samples must be at least 1");
}

int cmd_sample(const Options& o, std::ostream& out, std::ostream& err) {
  require_samples(o);
  Pipeline p = prepare(o);
  Output dest(o.out, out);
  const SamplerLimits limits = limits_from(o, err);
  Philox rng(o.seed, kSampleStream);
  std::vector<double> per_sample;
  for (Index i = 0; i < o.num_samples; ++i) {
    const auto start = Clock::now();
    const DppSubset s = p.sampler->sample(rng, limits);
    per_sample.push_back(seconds_since(start));
    *dest << sample_line(s).dump() << '\n';
  }
  const auto& stats = p.sampler->stats();
  err << json{{"timing",
               {{"sketch_build_seconds", p.sketch_build_seconds},
                {"precompute_seconds", p.precompute_seconds},
                {"first_sample_seconds", per_sample.front()},
                {"mean_sample_seconds", std::accumulate(per_sample.begin(), per_sample.end(), 0.0) /
                                            static_cast<double>(per_sample.size())},
                {"doublings", stats.doublings},
                {"acceptance_estimate", stats.acceptance_estimate()}}}}
             .dump()
      << '\n';
  return 0;
}

int cmd_ksample(const Options& o, std::ostream& out, std::ostream& err) {
  require_samples(o);
  if (o.k < 1) throw InvalidInput("--k must be at least 1");
  Pipeline p = prepare(o);
  Output dest(o.out, out);
  const auto start = Clock::now();
  KdppSampler kdpp(*p.sampler, o.k, parse_q(o.q));
  const double calibrate_seconds = seconds_since(start);
  const KdppCalibration& c = kdpp.calibration();
  err << json{{"calibration",
               {{"k", c.k},
                {"alpha_star", c.alpha_star},
                {"s_alpha", c.s_alpha_achieved},
                {"target", c.target},
                {"iterations", c.iterations}}}}
             .dump()
      << '\n';

  KdppLimits limits;
  limits.inner = limits_from(o, err);
  Philox rng(o.seed, kSampleStream);
  double sampling = 0.0;
  for (Index i = 0; i < o.num_samples; ++i) {
    const std::uint64_t before = kdpp.size_rejections();
    const auto t0 = Clock::now();
    const DppSubset s = kdpp.sample(rng, limits);
    sampling += seconds_since(t0);
    json line = sample_line(s);
    line["size_rejections"] = kdpp.size_rejections() - before;
    *dest << line.dump() << '\n';
  }
  err << json{{"timing",
               {{"sketch_build_seconds", p.sketch_build_seconds},
                {"precompute_seconds", p.precompute_seconds + calibrate_seconds},
                {"mean_sample_seconds", sampling / static_cast<double>(o.num_samples)}}}}
             .dump()
      << '\n';
  return 0;
}

int cmd_rls(const Options& o, std::ostream& out, std::ostream& err) {
  Pipeline p = prepare(o);
  Output dest(o.out, out);
  if (p.sampler->is_zero()) throw InvalidInput("zero kernel has no leverage profile");
  const NystromSketch& sketch = p.sampler->sketch();
  const LeverageProfile& profile = p.sampler->profile();
  json report{{"n", sketch.n()},
              {"m", sketch.m()},
              {"dictionary", sketch.dictionary()},
              {"leverage", std::vector<double>(profile.l.begin(), profile.l.end())},
              {"s_hat", profile.s_hat},
              {"q", profile.q},
              {"s_tilde", sketch.s_tilde()},
              {"logdet_ihat", sketch.logdet_ihat()}};
  if (o.exact) {
    if (p.kernel.size() > 5000) throw InvalidInput("--exact is limited to n ≤ 5000");
    const RidgeLeverage exact = exact_rls(p.kernel.to_dense(), 1.0);
    report["tau_exact"] = std::vector<double>(exact.tau.begin(), exact.tau.end());
    report["d_eff"] = exact.d_eff;
    report["precondition_gap"] = precondition_gap(p.kernel, sketch);
  }
  *dest << report.dump() << '\n';
  err << json{{"timing", {{"sketch_build_seconds", p.sketch_build_seconds}, {"precompute_seconds", p.precompute_seconds}}}}
             .dump()
      << '\n';
  return 0;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  SuiteOptions suite;
  suite.quick = o.quick;
  suite.only = o.only;
  suite.log = &err;
  if (!o.inject_fault.empty()) {
    if (o.inject_fault != "flip-accept") throw InvalidInput("unknown fault '" + o.inject_fault + "'");
    suite.flip_accept_sign = true;
  }
  const SuiteReport report = run_acceptance_suite(suite);
  err << (report.passed() ? "acceptance suite passed" : "acceptance suite FAILED") << '\n';
  Output dest(o.out, out);
  *dest << report.to_json().dump(2) << '\n';
  return report.passed() ? 0 : 5;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  ScalingConfig config;
  config.sizes = o.sizes;
  config.dim = o.dim;
  config.clusters = o.clusters;
  config.resamples = o.resamples;
  config.seed = o.seed;
  if (o.k > 0) config.k = o.k;
  if (!o.synthetic.empty()) {
    const SyntheticSpec spec = parse_synthetic(o.synthetic);
    config.sizes = {spec.n};
    config.dim = spec.d;
    config.clusters = spec.clusters;
  }
  for (const Index n : config.sizes) {
    if (n < 2) throw InvalidInput("bench sizes must be at least 2");
  }
  Output dest(o.out, out);
  const auto points = run_scaling(config, &err);
  write_scaling_csv(*dest, points);
  for (const auto& p : points) {
    if (p.mode_rejections > 10) {
      err << "warning: mode of rejection counts is " << p.mode_rejections << " at n = " << p.n << '\n';
    }
  }
  return 0;
}

void add_source_options(CLI::App* app, Options& o) {
  auto* kernel = app->add_option("--kernel", o.kernel_path, "Dense kernel file (text or binary)");
  auto* points = app->add_option("--points", o.points_path, "Point cloud file; Gaussian kernel");
  auto* synth = app->add_option("--synthetic", o.synthetic, "Gaussian blobs n,d,clusters; Gaussian kernel");
  kernel->excludes(points, synth);
  points->excludes(synth);
  app->add_option("--sigma", o.sigma, "Gaussian bandwidth (default sqrt(3d))");
  app->add_flag("--strict-symmetry", o.strict_symmetry, "Reject kernels asymmetric beyond 1e-6");
}

void add_sketch_options(CLI::App* app, Options& o) {
  auto* m = app->add_option("--m", o.m, "Dictionary size cap");
  auto* policy = app->add_option("--m-policy", o.m_policy, "Dictionary sizing")
                     ->check(CLI::IsMember({"practical", "guaranteed", "full"}));
  m->excludes(policy);
  app->add_option("--qbar-b", o.qbar_b, "Oversampling of the bootstrap refinement level");
  app->add_option("--qbar-d", o.qbar_d, "Oversampling of the final dictionary");
  app->add_flag("--refine-bootstrap", o.refine, "Add a leverage-driven level after the uniform bootstrap");
  app->add_option("--q", o.q, "Intermediate size parameter: auto or a positive number");
  app->add_option("--sketch-in", o.sketch_in, "Load the sketch instead of building it");
  app->add_option("--sketch-out", o.sketch_out, "Save the sketch");
}

void add_sampling_options(CLI::App* app, Options& o) {
  app->add_option("--num-samples", o.num_samples, "Number of samples");
  app->add_flag("--debug-accept", o.debug_accept, "Write one JSON line per proposal to stderr");
  app->add_flag("--no-auto-double", o.no_auto_double, "Fail instead of doubling the dictionary");
  app->add_option("--max-rejections", o.max_rejections, "Rejection budget per sample");
  app->add_flag("--naive-accept", o.naive_accept, "Acceptance via eigenvalues (debug)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Exact DPP and k-DPP sampling with Nystrom sketches", "dppvfx"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto* sample = app.add_subcommand("sample", "Draw DPP samples");
  auto* ksample = app.add_subcommand("ksample", "Draw fixed-size k-DPP samples");
  auto* rls = app.add_subcommand("rls", "Dictionary and approximate leverage profile");
  auto* validate = app.add_subcommand("validate", "Run the acceptance suite");
  auto* bench = app.add_subcommand("bench", "Scaling sweep on synthetic blobs (CSV)");

  for (auto* cmd : {sample, ksample, rls, validate, bench}) {
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--out", o.out, "Output file (default stdout)");
  }
  for (auto* cmd : {sample, ksample, rls}) {
    add_source_options(cmd, o);
    add_sketch_options(cmd, o);
  }
  add_sampling_options(sample, o);
  add_sampling_options(ksample, o);
  ksample->add_option("--k", o.k, "Sample size")->required();
  rls->add_flag("--exact", o.exact, "Also report exact leverage scores and the precondition gap");

  validate->add_flag("--quick", o.quick, "Skip the scaling sweep");
  validate->add_option("--only", o.only, "Run only these criteria")->delimiter(',');
  validate->add_option("--inject-fault", o.inject_fault)->group("");

  bench->add_option("--sizes", o.sizes, "Ground set sizes")->delimiter(',');
  bench->add_option("--dim", o.dim, "Dimension");
  bench->add_option("--clusters", o.clusters, "Mixture components");
  bench->add_option("--k", o.k, "Target expected sample size");
  bench->add_option("--resamples", o.resamples, "Resamples per size");
  bench->add_option("--synthetic", o.synthetic, "Single point n,d,clusters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", {{"kind", "usage"}, {"message", e.what()}, {"exit_code", 2}}}}.dump() << '\n';
    return 2;
  }

  try {
    if (*sample) return cmd_sample(o, out, err);
    if (*ksample) return cmd_ksample(o, out, err);
    if (*rls) return cmd_rls(o, out, err);
    if (*validate) return cmd_validate(o, out, err);
    return cmd_bench(o, out, err);
  } catch (const Error& e) {
    json body{{"kind", e.kind()}, {"message", e.what()}, {"exit_code", e.exit_code()}};
    if (const auto* r = dynamic_cast<const RejectionBudgetError*>(&e)) {
      body["s_hat"] = r->s_hat();
      body["s_tilde"] = r->s_tilde();
      body["rejections"] = r->rejections();
    } else if (const auto* s = dynamic_cast<const SizeBudgetError*>(&e)) {
      body["size_histogram"] = s->histogram();
    } else if (const auto* n = dynamic_cast<const NumericError*>(&e); n && n->iterations() >= 0) {
      body["iterations"] = n->iterations();
    }
    err << json{{"error", body}}.dump() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << json{{"error", {{"kind", "internal"}, {"message", e.what()}, {"exit_code", 1}}}}.dump() << '\n';
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"dppvfx"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace dppvfx
