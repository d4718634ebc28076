#include "icra/experiment.hpp"

#include <cmath>
#include <sstream>

#include "icra/format.hpp"

namespace icra::cli {

namespace {

std::string join_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

ThetaDistribution read_theta(const KeyValueConfig& kv, const std::string& prefix, int dim,
                             const ThetaDistribution& fallback) {
  ThetaDistribution dist = fallback;
  const std::string kind = kv.get_string(prefix + ".kind", dist.kind == ThetaKind::tanh_uniform ? "tanh_uniform" : "mixture");
  if (kind == "tanh_uniform") {
    dist.kind = ThetaKind::tanh_uniform;
    return dist;
  }
  if (kind != "mixture") throw ConfigError(kv.source() + ": " + prefix + ".kind must be mixture or tanh_uniform");
  dist.kind = ThetaKind::gaussian_mixture;
  dist.mixture.means = kv.get_vectors(prefix + ".means", dist.mixture.means);
  std::vector<double> weights = kv.get_doubles(prefix + ".weights", {});
  if (weights.empty()) {
    if (dist.mixture.weights.size() == dist.mixture.means.size()) {
      weights = dist.mixture.weights;
    } else {
      weights.assign(dist.mixture.means.size(), 1.0 / static_cast<double>(dist.mixture.means.size()));
    }
  }
  dist.mixture.weights = weights;
  const double fallback_scale = dist.mixture.cov.size() > 0 ? dist.mixture.cov(0, 0) : 0.25;
  const double cov_scale = kv.get_double(prefix + ".cov_scale", fallback_scale);
  dist.mixture.cov = cov_scale * Mat::Identity(dim, dim);
  return dist;
}

SweepSpec default_sweep(const std::string& name) {
  SweepSpec s;
  s.name = name;
  if (name == "n") {
    s.rate.variable = eval::SweepVariable::n;
    s.rate.grid = {8, 16, 32, 64, 128, 256};
    s.rate.n_tasks = 1 << 17;
    s.rate.replications = 4;
    s.expected_slope = -0.5;
    s.tolerance = 0.15;
  } else if (name == "k") {
    s.rate.variable = eval::SweepVariable::k;
    s.rate.grid = {16, 32, 64, 128, 256, 512};
    s.rate.n_demos = 32;
    s.rate.n_tasks = 1 << 16;
    s.rate.replications = 3;
    s.expected_slope = -0.5;
    s.tolerance = 0.15;
  } else if (name == "m") {
    s.rate.variable = eval::SweepVariable::m;
    s.rate.grid = {4, 8, 16, 32, 64, 128, 256};
    s.rate.n_tasks = 1 << 15;
    s.expected_slope = -1.0;
    s.tolerance = 0.2;
  } else if (name == "binary_n_1d") {
    s.rate.variable = eval::SweepVariable::binary_n_1d;
    s.rate.grid = {16, 32, 64, 128, 256, 512, 1024};
    s.expected_slope = -1.0;
    s.tolerance = 0.25;
  } else if (name == "ratio_exponential" || name == "ratio_ddm") {
    s.is_ratio = true;
    s.ratio.kind = name == "ratio_ddm" ? eval::RatioKind::ddm : eval::RatioKind::shifted_exponentials;
    s.ratio.grid = {8, 16, 32, 64, 128, 256, 512};
    s.expected_slope = -1.0;
    s.tolerance = 0.2;
  } else {
    throw ConfigError("unknown sweep '" + name +
                      "' (expected n, k, m, binary_n_1d, ratio_exponential or ratio_ddm)");
  }
  return s;
}

}  // namespace

PopulationSpec default_population(int dim) {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  PopulationSpec spec;
  spec.dim = dim;
  spec.features.kind = FeatureKind::isotropic_gaussian;
  spec.features.scale = 1.0;
  spec.features.bound = 4.0;
  const Mat cov = 0.25 * Mat::Identity(dim, dim);
  Vec a = Vec::Zero(dim);
  a[0] = 2.0;
  spec.theta.mixture = GaussianMixture{{a, -a}, cov, {0.5, 0.5}};
  Vec o = Vec::Zero(dim);
  o[dim > 1 ? 1 : 0] = 4.0;
  spec.ood.mixture = single_gaussian(o, cov);
  return spec;
}

std::string describe_population(const PopulationSpec& spec) {
  std::ostringstream o;
  o << "dim = " << spec.dim << '\n'
    << "features.kind = " << to_string(spec.features.kind) << '\n'
    << "features.scale = " << format_double(spec.features.scale) << '\n'
    << "features.bound = " << format_double(spec.features.bound) << '\n';
  for (const auto& [prefix, dist] : {std::pair<const char*, const ThetaDistribution*>{"theta", &spec.theta},
                                     {"ood", &spec.ood}}) {
    if (dist->kind == ThetaKind::tanh_uniform) {
      o << prefix << ".kind = tanh_uniform\n";
      continue;
    }
    o << prefix << ".kind = mixture\n" << prefix << ".means = ";
    for (std::size_t i = 0; i < dist->mixture.means.size(); ++i) o << (i ? "; " : "") << join_vec(dist->mixture.means[i]);
    o << '\n' << prefix << ".weights = ";
    for (std::size_t i = 0; i < dist->mixture.weights.size(); ++i) o << (i ? "," : "") << format_double(dist->mixture.weights[i]);
    o << '\n' << prefix << ".cov_scale = " << format_double(dist->mixture.cov(0, 0)) << '\n';
  }
  return o.str();
}

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& kv, std::optional<std::uint64_t> seed_override,
                                        const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  if (seed_override) {
    c.seed = *seed_override;
    kv.get_string("seed", "");  // an override still consumes the key
  } else {
    if (!kv.has("seed")) throw ConfigError(kv.source() + ": a seed is mandatory (set 'seed' or pass --seed)");
    const long seed = kv.get_int("seed", 0);
    if (seed < 0) throw ConfigError(kv.source() + ": seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
  }

  // Population.
  const int dim = static_cast<int>(kv.get_int("dim", 5));
  c.spec = default_population(dim);
  c.spec.features.kind = parse_feature_kind(kv.get_string("features.kind", "gaussian"));
  c.spec.features.scale = kv.get_double("features.scale", c.spec.features.scale);
  c.spec.features.bound = kv.get_double("features.bound", c.spec.features.bound);
  c.spec.theta = read_theta(kv, "theta", dim, c.spec.theta);
  c.spec.ood = read_theta(kv, "ood", dim, c.spec.ood);
  c.spec.validate();

  // Response-time model.
  c.ddm.sampler = synth::parse_sampler(kv.get_string("ddm.sampler", "aggregate"));
  c.ddm.dt = kv.get_double("ddm.dt", c.ddm.dt);
  c.ddm.max_time = kv.get_double("ddm.max_time", c.ddm.max_time);
  c.ddm.bridge_correction = kv.get_bool("ddm.bridge", c.ddm.bridge_correction);
  c.ddm.aggregate_min_k = static_cast<int>(kv.get_int("ddm.aggregate_min_k", c.ddm.aggregate_min_k));
  c.ddm.validate();

  c.n_demos = static_cast<int>(kv.get_int("n", c.n_demos));
  c.m_demos = static_cast<int>(kv.get_int("m", c.m_demos));
  c.k = static_cast<int>(kv.get_int("k", c.k));
  if (c.n_demos < 1 || c.m_demos < 1 || c.k < 1) throw ConfigError(kv.source() + ": n, m and k must be >= 1");

  // generate
  const long n_generate = kv.get_int("generate.n_tasks", static_cast<long>(c.generate_tasks));
  if (n_generate < 1) throw ConfigError(kv.source() + ": generate.n_tasks must be >= 1");
  c.generate_tasks = static_cast<std::size_t>(n_generate);
  c.generate_mode = parse_label_mode(kv.get_string("generate.mode", "response_time"));
  const std::string theta_mode = kv.get_string("generate.theta", "in_dist");
  if (theta_mode != "in_dist" && theta_mode != "ood") throw ConfigError(kv.source() + ": generate.theta must be in_dist or ood");
  c.generate_theta = theta_mode == "ood" ? synth::ThetaMode::ood : synth::ThetaMode::in_dist;

  // train
  c.train_modes.clear();
  for (const auto& m : kv.get_strings("train.modes", {"binary", "response_time"})) c.train_modes.push_back(parse_label_mode(m));
  if (c.train_modes.empty()) throw ConfigError(kv.source() + ": train.modes is empty");
  const long batch = kv.get_int("train.batch_tasks", static_cast<long>(c.train.batch_tasks));
  const long holdout = kv.get_int("train.holdout_tasks", static_cast<long>(c.train.holdout_tasks));
  if (batch < 1 || holdout < 1) throw ConfigError(kv.source() + ": train.batch_tasks and train.holdout_tasks must be >= 1");
  c.train.batch_tasks = static_cast<std::size_t>(batch);
  c.train.holdout_tasks = static_cast<std::size_t>(holdout);
  c.train.max_iters = static_cast<int>(kv.get_int("train.max_iters", c.train.max_iters));
  const std::string step = kv.get_string("train.step_size", "auto");
  if (step != "auto") c.train.step_size = kv.get_double("train.step_size", 0.0);
  const std::string tol = kv.get_string("train.grad_tol", "auto");
  if (tol != "auto") c.train.grad_tol = kv.get_double("train.grad_tol", 0.0);
  c.train.radius = kv.get_double("train.radius", c.train.radius);
  c.train.fresh_tasks = kv.get_bool("train.fresh_tasks", c.train.fresh_tasks);
  c.train.check_every = static_cast<int>(kv.get_int("train.check_every", c.train.check_every));
  c.train.precondition = kv.get_bool("train.precondition", c.train.precondition);
  if (kv.has("train.target")) c.train_target = kv.get_double("train.target", 0.0);
  c.train.validate();

  // eval
  const long n_eval = kv.get_int("eval.n_tasks", static_cast<long>(c.eval.n_tasks));
  if (n_eval < 1) throw ConfigError(kv.source() + ": eval.n_tasks must be >= 1");
  c.eval.n_tasks = static_cast<std::size_t>(n_eval);
  c.eval.n_demos = c.m_demos;
  c.eval.k = c.k;
  c.eval.truth = eval::parse_ground_truth(kv.get_string("eval.truth", "bayes"));
  c.eval.ddm = c.ddm;
  c.eval.seed = c.seed;
  c.eval_m_grid = kv.get_ints("eval.m_grid", c.eval_m_grid);
  for (int m : c.eval_m_grid) {
    if (m < 1) throw ConfigError(kv.source() + ": eval.m_grid values must be >= 1");
  }
  c.binary_gap_min = kv.get_double("eval.binary_gap_min", c.binary_gap_min);
  c.rt_gap_max = kv.get_double("eval.rt_gap_max", c.rt_gap_max);
  c.eval.validate();

  // data
  const std::string source = kv.get_string("data.source", "synthetic");
  if (source == "ingest") {
    c.source = DataSource::ingest;
    std::filesystem::path path = kv.require_string("data.path");
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    c.ingest.path = path;
    c.ingest.split.heldout = kv.get_strings("data.heldout", {});
    if (c.ingest.split.heldout.empty()) throw ConfigError(kv.source() + ": data.heldout must name at least one participant");
    c.ingest.split.min_trials = static_cast<std::size_t>(kv.get_int("data.min_trials", 1));
    auto& s = c.ingest.schema;
    s.participant = kv.get_string("data.columns.participant", s.participant);
    s.r0a = kv.get_string("data.columns.r0a", s.r0a);
    s.r0b = kv.get_string("data.columns.r0b", s.r0b);
    s.r1a = kv.get_string("data.columns.r1a", s.r1a);
    s.r1b = kv.get_string("data.columns.r1b", s.r1b);
    s.choice = kv.get_string("data.columns.choice", s.choice);
    s.rt = kv.get_string("data.columns.rt", s.rt);
  } else if (source != "synthetic") {
    throw ConfigError(kv.source() + ": data.source must be synthetic or ingest");
  }

  // rates
  for (const auto& name : kv.get_strings("rates.sweeps", {"n", "m", "binary_n_1d", "ratio_exponential", "ratio_ddm"})) {
    SweepSpec s = default_sweep(name);
    const std::string p = "rates." + name + ".";
    s.expected_slope = kv.get_double(p + "expected_slope", s.expected_slope);
    s.tolerance = kv.get_double(p + "tolerance", s.tolerance);
    if (!(s.tolerance > 0.0)) throw ConfigError(kv.source() + ": " + p + "tolerance must be positive");
    if (s.is_ratio) {
      s.ratio.grid = kv.get_ints(p + "grid", s.ratio.grid);
      s.ratio.replications = static_cast<int>(kv.get_int(p + "replications", s.ratio.replications));
      s.ratio.mean_x = kv.get_double(p + "mean_x", s.ratio.mean_x);
      s.ratio.mean_y = kv.get_double(p + "mean_y", s.ratio.mean_y);
      s.ratio.drift = kv.get_double(p + "drift", s.ratio.drift);
      s.ratio.seed = c.seed;
      s.ratio.validate();
    } else {
      s.rate.grid = kv.get_ints(p + "grid", s.rate.grid);
      s.rate.n_tasks = static_cast<std::size_t>(kv.get_int(p + "n_tasks", static_cast<long>(s.rate.n_tasks)));
      s.rate.replications = static_cast<int>(kv.get_int(p + "replications", s.rate.replications));
      s.rate.n_demos = static_cast<int>(kv.get_int(p + "n", s.rate.n_demos));
      s.rate.k = static_cast<int>(kv.get_int(p + "k", s.rate.k));
      s.rate.spec = c.spec;
      s.rate.ddm = c.ddm;
      s.rate.seed = c.seed;
      s.rate.validate();
    }
    c.sweeps.push_back(s);
  }

  // impossibility
  c.impossibility.min = kv.get_double("impossibility.min", c.impossibility.min);
  c.impossibility.max = kv.get_double("impossibility.max", c.impossibility.max);
  c.impossibility.step = kv.get_double("impossibility.step", c.impossibility.step);
  if (!(c.impossibility.max >= c.impossibility.min) || !(c.impossibility.step > 0.0)) {
    throw ConfigError(kv.source() + ": impossibility grid needs max >= min and step > 0");
  }

  const auto unused = kv.unused_keys();
  if (!unused.empty()) {
    std::string list;
    for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError(kv.source() + ": unknown key(s): " + list);
  }
  return c;
}

}  // namespace icra::cli
