// uqdvr: ensemble generation, distribution estimation and uncertainty-aware
// volume rendering from the command line.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "uqdvr/uqdvr.hpp"

namespace fs = std::filesystem;
using namespace uqdvr;

namespace {

void stage(const std::string& msg) { std::cerr << "uqdvr: " << msg << '\n'; }

struct GenOptions {
  std::string field = "tangle";
  std::string dims = "64x64x64";
  std::size_t members = 1;
  std::string noise = "gaussian:0";
  std::uint64_t seed = 0;
  std::string truth;
  std::string out;
  unsigned threads = 0;
};

struct EstimateOptions {
  std::string in;
  std::string model = "quantile";
  std::optional<double> qval;
  std::string estimator = "kde";
  std::size_t gmm_k = 4;
  std::size_t brick = 0;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 0;
};

struct RenderOptions {
  std::string in;
  std::string scheme;
  std::string tf;
  std::string tf2d;
  std::string camera;
  double step = 0.5;
  double reference_length = 0.0;
  std::string size = "256x256";
  std::string background = "0,0,0,1";
  std::size_t mc_samples = 64;
  std::size_t tf2d_samples = 256;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 0;
};

void add_render_flags(CLI::App* cmd, RenderOptions& o, bool with_scheme) {
  cmd->add_option("--in", o.in, "Distribution volume (QVOL1 or DVOL1)")->required()->check(CLI::ExistingFile);
  if (with_scheme)
    cmd->add_option("--scheme", o.scheme,
                    "mean | uniform | gaussian | gmm-ordered | gmm-mc | quantile-range | quantile-mean | tf2d "
                    "(default: the natural scheme of the volume's model)");
  cmd->add_option("--tf", o.tf, "1D transfer function text file")->required()->check(CLI::ExistingFile);
  if (with_scheme) cmd->add_option("--tf2d", o.tf2d, "2D transfer function file (scheme tf2d)")->check(CLI::ExistingFile);
  cmd->add_option("--camera", o.camera, "ex,ey,ez,ax,ay,az,ux,uy,uz,fov (default frames the volume)");
  cmd->add_option("--step", o.step, "Sample step as a fraction of the smallest voxel spacing")->capture_default_str();
  cmd->add_option("--reference-length", o.reference_length,
                  "Opacity-correction reference length in world units; 0 uses the smallest voxel spacing")
      ->capture_default_str();
  cmd->add_option("--size", o.size, "Image size WxH")->capture_default_str();
  cmd->add_option("--background", o.background, "Background r,g,b,a")->capture_default_str();
  if (with_scheme) {
    cmd->add_option("--mc-samples", o.mc_samples, "Samples per ray sample for gmm-mc")->capture_default_str();
    cmd->add_option("--tf2d-samples", o.tf2d_samples, "Quadrature points per ray sample for tf2d")->capture_default_str();
  }
  cmd->add_option("--seed", o.seed, "Seed for stochastic schemes")->capture_default_str();
  cmd->add_option("--out", o.out, with_scheme ? "Output PPM; a .rgba f32 sidecar is written next to it"
                                              : "Output prefix; writes <prefix>.{lower,middle,upper}.{ppm,rgba}")
      ->required();
  cmd->add_option("--threads", o.threads, "Worker threads (default: UQDVR_THREADS, then all cores)");
}

Scheme natural_scheme(ModelKind kind) {
  switch (kind) {
    case ModelKind::MeanField: return Scheme::Mean;
    case ModelKind::Uniform: return Scheme::Uniform;
    case ModelKind::Gaussian: return Scheme::Gaussian;
    case ModelKind::Gmm: return Scheme::GmmOrdered;
    case ModelKind::Quantile: return Scheme::QuantileRange;
    case ModelKind::Samples: break;
  }
  throw std::invalid_argument("sample volumes cannot be rendered directly; estimate a model first");
}

RenderJob make_job(const RenderOptions& o, const DistributionVolume& volume) {
  RenderJob job;
  const auto [w, h] = detail::parse_size(o.size);
  const auto& g = volume.geometry();
  job.camera = o.camera.empty() ? Camera::framing(g.box_min(), g.box_max(), w, h) : parse_camera(o.camera, w, h);
  job.scheme = o.scheme.empty() ? natural_scheme(volume.kind()) : parse_scheme(o.scheme);
  job.tf = load_tf1d(o.tf);
  if (!o.tf2d.empty()) job.tf2d = load_tf2d(o.tf2d);
  job.step = o.step;
  job.reference_length = o.reference_length;
  const auto bg = detail::parse_numbers(o.background, "background");
  if (bg.size() != 4) throw std::invalid_argument("background needs four numbers r,g,b,a");
  job.background = {bg[0], bg[1], bg[2], bg[3]};
  job.mc_samples = o.mc_samples;
  job.tf2d_samples = o.tf2d_samples;
  job.seed = o.seed;
  job.threads = o.threads;
  return job;
}

fs::path sidecar_path(const fs::path& ppm) {
  fs::path p = ppm;
  return p.replace_extension(".rgba");
}

int cmd_gen(const GenOptions& o) {
  const FieldSpec field = FieldSpec::parse(o.field);
  NoiseSpec noise = NoiseSpec::parse(o.noise);
  noise.members = o.members;
  noise.seed = o.seed;
  stage("sampling field " + field.str());
  const ScalarGrid gt = sample_field(field, parse_dims(o.dims));
  stage("generating " + std::to_string(o.members) + " members");
  const EnsembleVolume ensemble = make_ensemble(gt, noise, {}, o.threads);
  save_ensemble(ensemble, o.out, o.seed, field.str(), noise.str());
  if (!o.truth.empty())
    save_volume(DistributionVolume(gt.geometry(), MeanFieldModel{{gt.values().begin(), gt.values().end()}}), o.truth);
  stage("wrote " + o.out);
  return 0;
}

int cmd_estimate(const EstimateOptions& o) {
  ModelSpec spec;
  spec.kind = parse_model_kind(o.model);
  if (spec.kind == ModelKind::Quantile) {
    if (!o.qval) throw std::invalid_argument("--model quantile needs --qval");
    spec.qval = *o.qval;
  } else if (o.qval) {
    throw std::invalid_argument("--qval only applies to --model quantile");
  }
  if (o.estimator == "kde") spec.estimator = QuantileEstimator::Kde;
  else if (o.estimator == "empirical") spec.estimator = QuantileEstimator::Empirical;
  else throw std::invalid_argument("--estimator must be kde or empirical");
  spec.gmm_k = o.gmm_k;
  spec.seed = o.seed;
  stage("loading " + o.in);
  const EnsembleVolume ensemble = load_ensemble(o.in);
  DistributionVolume volume;
  if (o.brick > 0) {
    if (ensemble.size() != 1) throw std::invalid_argument("--brick downsamples a single grid; the ensemble has " +
                                                          std::to_string(ensemble.size()) + " members");
    stage("downsampling with " + std::to_string(o.brick) + "^3 bricks");
    volume = downsample_hixel(ensemble.member(0), {o.brick, o.brick, o.brick}, spec, o.threads).distribution;
  } else {
    stage("fitting " + o.model + " model per voxel");
    volume = build_distribution_volume(ensemble, spec, o.threads);
  }
  save_volume(volume, o.out);
  stage("wrote " + o.out);
  return 0;
}

int cmd_render(const RenderOptions& o) {
  stage("loading " + o.in);
  const DistributionVolume volume = load_volume(o.in);
  const RenderJob job = make_job(o, volume);
  stage("rendering with scheme " + std::string(to_string(job.scheme)));
  const Image img = raycast(volume, job);
  save_image(img, o.out);
  save_rgba32(img, sidecar_path(o.out));
  stage("wrote " + o.out);
  return 0;
}

int cmd_quartiles(const RenderOptions& o) {
  stage("loading " + o.in);
  const DistributionVolume volume = load_volume(o.in);
  RenderJob job = make_job(o, volume);
  job.scheme = Scheme::QuantileRange;
  stage("rendering quartile views");
  const auto views = render_quartile_views(volume, job);
  const char* names[3] = {"lower", "middle", "upper"};
  for (std::size_t i = 0; i < 3; ++i) {
    save_image(views[i], o.out + "." + names[i] + ".ppm");
    save_rgba32(views[i], o.out + "." + names[i] + ".rgba");
  }
  stage("wrote " + o.out + ".{lower,middle,upper}");
  return 0;
}

int cmd_diff(const std::string& img, const std::string& ref, const std::string& out, double range) {
  const DiffResult d = diff_image(load_image(img), load_image(ref), range);
  if (!out.empty()) save_image(d.image, out);
  std::cout.precision(9);
  std::cout << "rmse=" << d.rmse << '\n';
  return 0;
}

int cmd_experiment(const std::string& manifest, unsigned threads) {
  const ExperimentManifest m = load_experiment_manifest(manifest);
  const auto rows = run_experiment(m, threads, stage);
  for (const auto& r : rows)
    stage(std::string(to_string(r.scheme)) + " q=" + std::to_string(r.q) + " M=" + std::to_string(r.members) +
          " rmse=" + std::to_string(r.rmse));
  stage("wrote " + (m.out / "results.csv").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware direct volume rendering with quantile interpolation"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Sample a synthetic field and write a noisy ensemble");
  g->add_option("--field", gen.field, "tangle | teardrop | nested-spheres | linear:a,b,c | constant:c")->capture_default_str();
  g->add_option("--dims", gen.dims, "Grid size NXxNYxNZ")->capture_default_str();
  g->add_option("--members", gen.members, "Ensemble size M")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--noise", gen.noise,
                "gaussian:sigma | uniform:width | bimodal[:p_main,main_sigma,offset,outlier_sigma]")
      ->capture_default_str();
  g->add_option("--seed", gen.seed, "Noise seed")->capture_default_str();
  g->add_option("--truth", gen.truth, "Also write the noise-free field as a mean-field volume");
  g->add_option("--out", gen.out, "Ensemble manifest path; member files are written beside it")->required();
  g->add_option("--threads", gen.threads, "Worker threads (default: UQDVR_THREADS, then all cores)");

  EstimateOptions est;
  auto* e = app.add_subcommand("estimate", "Fit a per-voxel distribution model to an ensemble or hixel bricks");
  e->add_option("--in", est.in, "Ensemble manifest")->required()->check(CLI::ExistingFile);
  e->add_option("--model", est.model, "mean | uniform | gaussian | gmm | quantile | samples")->capture_default_str();
  e->add_option("--qval", est.qval, "Mass per quantile piece (quantile model; 1/qval must be an integer)");
  e->add_option("--estimator", est.estimator, "Quantile estimator: kde | empirical")->capture_default_str();
  e->add_option("--gmm-k", est.gmm_k, "Components per voxel (gmm model)")->capture_default_str();
  e->add_option("--brick", est.brick, "Downsample a one-member ensemble with NxNxN bricks (hixels)");
  e->add_option("--seed", est.seed, "Seed for the gmm fitter")->capture_default_str();
  e->add_option("--out", est.out, "Output volume (QVOL1 for quantile, DVOL1 otherwise)")->required();
  e->add_option("--threads", est.threads, "Worker threads (default: UQDVR_THREADS, then all cores)");

  RenderOptions ren;
  auto* r = app.add_subcommand("render", "Raycast a distribution volume");
  add_render_flags(r, ren, true);

  RenderOptions quart;
  auto* q = app.add_subcommand("quartiles", "Render lower-quartile, middle-50% and upper-quartile views");
  add_render_flags(q, quart, false);

  std::string diff_img, diff_ref, diff_out;
  double diff_range = 0.0;
  auto* d = app.add_subcommand("diff", "Difference image and RMSE of two renders");
  d->add_option("image", diff_img, "Image (.ppm or .rgba)")->required()->check(CLI::ExistingFile);
  d->add_option("reference", diff_ref, "Reference image (.ppm or .rgba)")->required()->check(CLI::ExistingFile);
  d->add_option("--out", diff_out, "Difference image (PPM)");
  d->add_option("--range", diff_range, "Color-map range; 0 uses the largest difference")->capture_default_str();

  std::string manifest;
  unsigned exp_threads = 0;
  auto* x = app.add_subcommand("experiment", "Run a manifest-driven comparison and write images plus results.csv");
  x->add_option("manifest", manifest, "Experiment manifest")->required()->check(CLI::ExistingFile);
  x->add_option("--threads", exp_threads, "Worker threads (default: UQDVR_THREADS, then all cores)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return cmd_gen(gen);
    if (*e) return cmd_estimate(est);
    if (*r) return cmd_render(ren);
    if (*q) return cmd_quartiles(quart);
    if (*d) return cmd_diff(diff_img, diff_ref, diff_out, diff_range);
    if (*x) return cmd_experiment(manifest, exp_threads);
  } catch (const std::exception& ex) {
    std::cerr << "uqdvr: error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}
