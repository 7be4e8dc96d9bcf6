#pragma once

// Experiment manifests: key=value text, '#' comments.
//
//   field=tangle            synthetic field spec (see synth.hpp)
//   dims=64x64x64
//   noise=bimodal           noise spec; ignored in hixel mode
//   members=5,50            ensemble sizes
//   seed=1
//   schemes=mean,uniform,gaussian,quantile-mean
//   q=2,4,8                 piece counts for the quantile schemes
//   estimator=kde           kde | empirical
//   gmm_k=4
//   brick=4                 hixel mode: downsample the field, no ensemble
//   tf=tf.txt               1D transfer function, relative to the manifest
//   tf2d=tf2d.bin           optional, for scheme tf2d
//   camera=ex,ey,ez,ax,ay,az,ux,uy,uz,fov   optional, default frames the box
//   size=256x256
//   step=0.5
//   out=results             output directory, relative to the manifest
//
// Ensemble mode renders every (scheme, q, M) against the mean-field render
// of the noise-free field. Hixel mode renders every (scheme, q) of the
// downsampled field against the full-resolution mean-field render, with the
// opacity reference length of the full-resolution grid.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqdvr/density.hpp"
#include "uqdvr/image.hpp"
#include "uqdvr/io.hpp"
#include "uqdvr/render.hpp"
#include "uqdvr/synth.hpp"
#include "uqdvr/transfer.hpp"

namespace uqdvr {

struct ExperimentManifest {
  FieldSpec field;
  Dims dims{64, 64, 64};
  NoiseSpec noise;
  std::vector<std::size_t> members{50};
  std::uint64_t seed = 0;
  std::vector<Scheme> schemes{Scheme::Mean};
  std::vector<std::size_t> q{8};
  QuantileEstimator estimator = QuantileEstimator::Kde;
  std::size_t gmm_k = 4;
  std::size_t brick = 0;
  TransferFunction1D tf;
  std::optional<TransferFunction2D> tf2d;
  std::optional<Camera> camera;
  std::size_t width = 256;
  std::size_t height = 256;
  double step = 0.5;
  std::filesystem::path out;
};

struct ExperimentRow {
  Scheme scheme;
  std::size_t q = 0;        // 0 for non-quantile schemes
  std::size_t members = 0;  // ensemble size, or samples per brick in hixel mode
  double rmse = 0.0;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  if (out.empty()) throw std::invalid_argument("empty list '" + s + "'");
  return out;
}

inline std::size_t parse_count(const std::string& s) {
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("expected an integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

inline std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw std::invalid_argument("expected WxH, got '" + s + "'");
  const auto w = parse_count(s.substr(0, x)), h = parse_count(s.substr(x + 1));
  if (w == 0 || h == 0) throw std::invalid_argument("image size must be positive, got '" + s + "'");
  return {w, h};
}

}  // namespace detail

/// Parses `eye,at,up,fov` (ten numbers) into a camera of the given size.
inline Camera parse_camera(std::string_view text, std::size_t width, std::size_t height) {
  const auto v = detail::parse_numbers(text, "camera");
  if (v.size() != 10) throw std::invalid_argument("camera needs ten numbers: ex,ey,ez,ax,ay,az,ux,uy,uz,fov");
  Camera c;
  c.eye = {v[0], v[1], v[2]};
  c.at = {v[3], v[4], v[5]};
  c.up = {v[6], v[7], v[8]};
  c.fov_deg = v[9];
  c.width = width;
  c.height = height;
  c.validate();
  return c;
}

inline ExperimentManifest load_experiment_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experiment manifest '" + path.string() + "'");
  const auto dir = path.parent_path();
  ExperimentManifest m;
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    kv[line.substr(first, eq - first)] = line.substr(eq + 1);
  }
  std::optional<std::string> camera_text;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "field") m.field = FieldSpec::parse(value);
      else if (key == "dims") m.dims = parse_dims(value);
      else if (key == "noise") m.noise = NoiseSpec::parse(value);
      else if (key == "members") {
        m.members.clear();
        for (const auto& s : detail::split_list(value)) m.members.push_back(detail::parse_count(s));
      } else if (key == "seed") m.seed = std::stoull(value);
      else if (key == "schemes") {
        m.schemes.clear();
        for (const auto& s : detail::split_list(value)) m.schemes.push_back(parse_scheme(s));
      } else if (key == "q") {
        m.q.clear();
        for (const auto& s : detail::split_list(value)) m.q.push_back(detail::parse_count(s));
      } else if (key == "estimator") {
        if (value == "kde") m.estimator = QuantileEstimator::Kde;
        else if (value == "empirical") m.estimator = QuantileEstimator::Empirical;
        else throw std::invalid_argument("estimator must be kde or empirical");
      } else if (key == "gmm_k") m.gmm_k = detail::parse_count(value);
      else if (key == "brick") m.brick = detail::parse_count(value);
      else if (key == "tf") m.tf = load_tf1d(dir / value);
      else if (key == "tf2d") m.tf2d = load_tf2d(dir / value);
      else if (key == "camera") camera_text = value;
      else if (key == "size") std::tie(m.width, m.height) = detail::parse_size(value);
      else if (key == "step") m.step = std::stod(value);
      else if (key == "out") m.out = dir / value;
      else throw std::invalid_argument("unknown key");
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw IoError(path.string() + ": key '" + key + "': " + e.what());
    }
  }
  if (!kv.count("tf")) throw IoError(path.string() + ": missing key 'tf'");
  if (!kv.count("out")) throw IoError(path.string() + ": missing key 'out'");
  if (camera_text) m.camera = parse_camera(*camera_text, m.width, m.height);
  return m;
}

namespace detail {

inline std::string experiment_label(Scheme s, std::size_t q, std::size_t members) {
  std::string label(to_string(s));
  if (q) label += "_q" + std::to_string(q);
  return label + "_M" + std::to_string(members);
}

inline void write_render(const Image& img, const std::filesystem::path& dir, const std::string& stem) {
  save_image(img, dir / (stem + ".ppm"));
  save_rgba32(img, dir / (stem + ".rgba"));
}

}  // namespace detail

/// Runs an experiment. Images go to m.out when it is non-empty; `log`
/// receives one line per stage. Rows come back in manifest order.
inline std::vector<ExperimentRow> run_experiment(const ExperimentManifest& m, unsigned threads = 0,
                                                 const std::function<void(const std::string&)>& log = {}) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  for (auto s : m.schemes)
    if (s == Scheme::Tf2d && !m.tf2d) throw std::invalid_argument("scheme tf2d needs a tf2d entry");
  const bool write = !m.out.empty();
  if (write) std::filesystem::create_directories(m.out);

  const ScalarGrid gt = sample_field(m.field, m.dims);
  const auto& g = gt.geometry();
  RenderJob base;
  base.camera = m.camera ? *m.camera : Camera::framing(g.box_min(), g.box_max(), m.width, m.height);
  base.tf = m.tf;
  base.tf2d = m.tf2d;
  base.step = m.step;
  base.seed = m.seed;
  base.threads = threads;
  base.reference_length = g.min_spacing();

  say("rendering ground truth");
  RenderJob truth_job = base;
  truth_job.scheme = Scheme::Mean;
  const Image truth = raycast(DistributionVolume(g, MeanFieldModel{{gt.values().begin(), gt.values().end()}}), truth_job);
  if (write) detail::write_render(truth, m.out, "ground_truth");

  std::vector<ExperimentRow> rows;
  auto run_sources = [&](std::size_t members, const std::function<DistributionVolume(const ModelSpec&)>& build) {
    for (Scheme s : m.schemes) {
      const bool quantile = required_model(s) == ModelKind::Quantile;
      const std::vector<std::size_t> qs = quantile ? m.q : std::vector<std::size_t>{0};
      for (std::size_t q : qs) {
        ModelSpec spec;
        spec.kind = required_model(s);
        if (quantile) spec.qval = 1.0 / static_cast<double>(q);
        spec.estimator = m.estimator;
        spec.gmm_k = m.gmm_k;
        spec.seed = m.seed;
        const std::string label = detail::experiment_label(s, q, members);
        say("estimating + rendering " + label);
        const DistributionVolume volume = build(spec);
        RenderJob job = base;
        job.scheme = s;
        const Image img = raycast(volume, job);
        const DiffResult d = diff_image(img, truth);
        rows.push_back({s, q, members, d.rmse});
        if (write) {
          detail::write_render(img, m.out, label);
          save_image(d.image, m.out / ("diff_" + label + ".ppm"));
        }
      }
    }
  };

  if (m.brick > 0) {
    const std::array<std::size_t, 3> brick{m.brick, m.brick, m.brick};
    run_sources(m.brick * m.brick * m.brick,
                [&](const ModelSpec& spec) { return downsample_hixel(gt, brick, spec, threads).distribution; });
  } else {
    for (std::size_t members : m.members) {
      NoiseSpec noise = m.noise;
      noise.members = members;
      noise.seed = m.seed;
      say("generating ensemble M=" + std::to_string(members));
      const EnsembleVolume ensemble = make_ensemble(gt, noise, {}, threads);
      run_sources(members, [&](const ModelSpec& spec) { return build_distribution_volume(ensemble, spec, threads); });
    }
  }

  if (write) {
    std::ostringstream csv;
    csv.precision(9);
    csv << "scheme,q,M,rmse\n";
    for (const auto& r : rows) csv << to_string(r.scheme) << ',' << r.q << ',' << r.members << ',' << r.rmse << '\n';
    const std::string text = csv.str();
    detail::write_file(m.out / "results.csv", std::vector<char>(text.begin(), text.end()));
  }
  return rows;
}

}  // namespace uqdvr
