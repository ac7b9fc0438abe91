// aquafield: synthesize underwater datasets, train the restoration field,
// render degraded/restored views, and score them.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aqua/errors.hpp"
#include "aqua/manifest.hpp"
#include "aqua/metrics.hpp"
#include "aqua/trainer.hpp"
#include "aqua/waterform.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Everything a run can configure. Config-file values are defaults; flags win.
struct RunConfig {
  std::string dataset, out, checkpoint;
  std::string water_preset = "paper";
  std::string mode = "restored";
  std::string split = "test";
  aqua::WaterParams water = aqua::WaterParams::paper_preset();
  aqua::TrainConfig train;
  int width = 64, height = 64;
  int train_views = 16, test_views = 4;
  std::vector<std::pair<int, int>> pairs;  // consistency pose pairs
};

std::array<double, 3> parse_triple(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3)
    throw aqua::config_error("config: '" + key + "' must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void load_config_file(const std::string& path, RunConfig& rc) {
  std::ifstream in(path);
  if (!in) throw aqua::usage_error("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw aqua::config_error("config parse error in " + path + ": " + e.what());
  }
  for (auto& [key, val] : j.items()) {
    if (key == "dataset") rc.dataset = val.get<std::string>();
    else if (key == "out") rc.out = val.get<std::string>();
    else if (key == "checkpoint") rc.checkpoint = val.get<std::string>();
    else if (key == "water_preset") rc.water_preset = val.get<std::string>();
    else if (key == "mode") rc.mode = val.get<std::string>();
    else if (key == "split") rc.split = val.get<std::string>();
    else if (key == "seed") rc.train.seed = val.get<uint64_t>();
    else if (key == "alpha") rc.train.alpha = val.get<double>();
    else if (key == "iters") rc.train.total_iters = val.get<int>();
    else if (key == "smoothing") rc.train.smoothing_enabled = val.get<bool>();
    else if (key == "rays_per_batch") rc.train.rays_per_batch = val.get<int>();
    else if (key == "samples_per_ray") rc.train.samples_per_ray = val.get<int>();
    else if (key == "lr_start") rc.train.lr_start = val.get<double>();
    else if (key == "lr_end") rc.train.lr_end = val.get<double>();
    else if (key == "checkpoint_every") rc.train.checkpoint_every = val.get<int>();
    else if (key == "histogram_bins") rc.train.histogram_bins = val.get<int>();
    else if (key == "sinkhorn_epsilon") rc.train.sinkhorn_epsilon = val.get<double>();
    else if (key == "sinkhorn_max_iters") rc.train.sinkhorn_max_iters = val.get<int>();
    else if (key == "sinkhorn_tol") rc.train.sinkhorn_tol = val.get<double>();
    else if (key == "width") rc.width = val.get<int>();
    else if (key == "height") rc.height = val.get<int>();
    else if (key == "train_views") rc.train_views = val.get<int>();
    else if (key == "test_views") rc.test_views = val.get<int>();
    else if (key == "water") {
      for (auto& [wk, wv] : val.items()) {
        if (wk == "beta_d") rc.water.beta_d = parse_triple(wv, "water.beta_d");
        else if (wk == "beta_b") rc.water.beta_b = parse_triple(wv, "water.beta_b");
        else if (wk == "b_inf") rc.water.b_inf = parse_triple(wv, "water.b_inf");
        else throw aqua::config_error("config: unknown key 'water." + wk + "'");
      }
    } else if (key == "pairs") {
      for (const auto& p : val) {
        if (!p.is_array() || p.size() != 2)
          throw aqua::config_error("config: 'pairs' entries must be [a, b]");
        rc.pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
    } else {
      throw aqua::config_error("config: unknown key '" + key + "'");
    }
  }
}

aqua::RenderMode parse_mode(const std::string& mode) {
  if (mode == "degraded") return aqua::RenderMode::Degraded;
  if (mode == "restored") return aqua::RenderMode::Restored;
  throw aqua::usage_error("--mode must be 'degraded' or 'restored', got '" + mode + "'");
}

std::vector<int> split_ids(const aqua::Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train_ids;
  if (split == "test") return ds.test_ids;
  if (split == "all") {
    std::vector<int> ids = ds.train_ids;
    ids.insert(ids.end(), ds.test_ids.begin(), ds.test_ids.end());
    return ids;
  }
  throw aqua::usage_error("--split must be 'train', 'test', or 'all'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw aqua::io_error("cannot create directory " + dir + ": " + ec.message());
}

int cmd_synth(const RunConfig& rc) {
  if (rc.out.empty()) throw aqua::usage_error("synth requires --out");
  aqua::WaterParams water =
      rc.water_preset == "paper" ? aqua::WaterParams::paper_preset() : rc.water;
  if (rc.water_preset != "paper" && rc.water_preset != "custom")
    throw aqua::usage_error("--water-preset must be 'paper' or 'custom'");
  aqua::SceneSpec scene = aqua::make_default_scene(rc.train.seed, rc.width, rc.height,
                                                   rc.train_views, rc.test_views);
  aqua::make_dataset(scene, water, rc.out, rc.train.seed);
  std::printf("dataset written to %s (%d train + %d test views, %dx%d)\n",
              rc.out.c_str(), rc.train_views, rc.test_views, rc.width, rc.height);
  return 0;
}

int cmd_train(const RunConfig& rc) {
  if (rc.dataset.empty()) throw aqua::usage_error("train requires --data");
  if (rc.out.empty()) throw aqua::usage_error("train requires --out");
  rc.train.validate();
  aqua::Dataset ds = aqua::load_dataset(rc.dataset);
  aqua::Trainer trainer(ds, rc.train);
  trainer.run(rc.out);
  std::printf("trained %d iterations; log and checkpoints in %s\n",
              rc.train.total_iters, rc.out.c_str());
  return 0;
}

int cmd_render(const RunConfig& rc) {
  if (rc.dataset.empty()) throw aqua::usage_error("render requires --data");
  if (rc.checkpoint.empty()) throw aqua::usage_error("render requires --ckpt");
  if (rc.out.empty()) throw aqua::usage_error("render requires --out");
  aqua::RenderMode mode = parse_mode(rc.mode);
  aqua::Dataset ds = aqua::load_dataset(rc.dataset);
  aqua::FieldParams<float> params = aqua::load_checkpoint(rc.checkpoint);
  ensure_dir(rc.out);
  char name[128];
  for (int id : split_ids(ds, rc.split)) {
    aqua::Image img = aqua::render_view(params, ds.manifest.poses[id],
                                        ds.manifest.t_near, ds.manifest.t_far,
                                        rc.train.samples_per_ray, mode,
                                        rc.train.smoothing_enabled);
    std::snprintf(name, sizeof(name), "%s/render_%s_%03d.png", rc.out.c_str(),
                  rc.mode.c_str(), id);
    aqua::write_png(name, img);
    std::printf("wrote %s\n", name);
  }
  return 0;
}

json report_json(const aqua::MetricReport& r) {
  return {{"psnr", r.psnr}, {"ssim", r.ssim}, {"lpips", "n/a"},
          {"nrmse", r.nrmse}, {"pixels", r.pixel_count}};
}

int cmd_eval(const RunConfig& rc) {
  if (rc.dataset.empty()) throw aqua::usage_error("eval requires --data");
  if (rc.checkpoint.empty()) throw aqua::usage_error("eval requires --ckpt");
  if (rc.out.empty()) throw aqua::usage_error("eval requires --out");
  aqua::Dataset ds = aqua::load_dataset(rc.dataset);
  aqua::FieldParams<float> params = aqua::load_checkpoint(rc.checkpoint);
  ensure_dir(rc.out);

  json rows = json::array();
  std::string table;
  char line[256];
  std::snprintf(line, sizeof(line), "%-5s %-5s  %-28s %8s %8s %6s %8s\n", "view",
                "split", "comparison", "psnr", "ssim", "lpips", "nrmse");
  table += line;

  auto add_row = [&](int id, const std::string& split, const std::string& what,
                     const aqua::MetricReport& r) {
    std::snprintf(line, sizeof(line), "%-5d %-5s  %-28s %8.3f %8.4f %6s %8.4f\n", id,
                  split.c_str(), what.c_str(), r.psnr, r.ssim, "n/a", r.nrmse);
    table += line;
    json jr = report_json(r);
    jr["view"] = id;
    jr["split"] = split;
    jr["comparison"] = what;
    rows.push_back(jr);
  };

  double sum_restored = 0, sum_input = 0;
  int n_test = 0;
  for (int id : split_ids(ds, "all")) {
    const std::string split = ds.manifest.frames[id].split;
    const auto& pose = ds.manifest.poses[id];
    aqua::Image degraded_render =
        aqua::render_view(params, pose, ds.manifest.t_near, ds.manifest.t_far,
                          rc.train.samples_per_ray, aqua::RenderMode::Degraded,
                          rc.train.smoothing_enabled);
    aqua::Image restored_render =
        aqua::render_view(params, pose, ds.manifest.t_near, ds.manifest.t_far,
                          rc.train.samples_per_ray, aqua::RenderMode::Restored,
                          rc.train.smoothing_enabled);
    add_row(id, split, "degraded render vs input",
            aqua::metric_report(degraded_render, ds.degraded[id]));
    aqua::MetricReport restored = aqua::metric_report(restored_render, ds.clean[id]);
    aqua::MetricReport input = aqua::metric_report(ds.degraded[id], ds.clean[id]);
    add_row(id, split, "restored render vs clean", restored);
    add_row(id, split, "degraded input vs clean", input);
    if (split == "test") {
      sum_restored += restored.psnr;
      sum_input += input.psnr;
      ++n_test;
    }
  }
  json summary;
  if (n_test > 0) {
    double delta = (sum_restored - sum_input) / n_test;
    std::snprintf(line, sizeof(line),
                  "\ntest-split mean: restored %.3f dB, degraded input %.3f dB, "
                  "improvement %+.3f dB\n",
                  sum_restored / n_test, sum_input / n_test, delta);
    table += line;
    summary = {{"test_restored_psnr", sum_restored / n_test},
               {"test_input_psnr", sum_input / n_test},
               {"test_psnr_improvement", delta}};
  }
  std::fputs(table.c_str(), stdout);
  std::ofstream txt(rc.out + "/eval.txt");
  txt << table;
  std::ofstream js(rc.out + "/eval.json");
  js << json{{"rows", rows}, {"summary", summary}}.dump(2) << "\n";
  if (!txt || !js) throw aqua::io_error("failed writing eval outputs to " + rc.out);
  return 0;
}

int cmd_consistency(const RunConfig& rc) {
  if (rc.dataset.empty()) throw aqua::usage_error("consistency requires --data");
  if (rc.checkpoint.empty()) throw aqua::usage_error("consistency requires --ckpt");
  if (rc.out.empty()) throw aqua::usage_error("consistency requires --out");
  aqua::RenderMode mode = parse_mode(rc.mode);
  aqua::Dataset ds = aqua::load_dataset(rc.dataset);
  aqua::FieldParams<float> params = aqua::load_checkpoint(rc.checkpoint);
  ensure_dir(rc.out);

  std::vector<std::pair<int, int>> pairs = rc.pairs;
  if (pairs.empty()) {
    // default: adjacent pose pairs over the chosen split
    std::vector<int> ids = split_ids(ds, rc.split);
    if (ids.size() < 2) throw aqua::usage_error("need at least 2 views for consistency");
    for (size_t i = 0; i + 1 < ids.size(); ++i) pairs.emplace_back(ids[i], ids[i + 1]);
  }
  const int n_views = static_cast<int>(ds.manifest.poses.size());
  for (auto [a, b] : pairs)
    if (a < 0 || b < 0 || a >= n_views || b >= n_views || a == b)
      throw aqua::usage_error("invalid consistency pose pair");

  aqua::RenderFn render_fn = [&](const aqua::CameraPose& pose) {
    return aqua::render_view(params, pose, ds.manifest.t_near, ds.manifest.t_far,
                             rc.train.samples_per_ray, mode, rc.train.smoothing_enabled);
  };

  json rows = json::array();
  std::string table;
  char line[256];
  std::snprintf(line, sizeof(line), "%-9s %8s %8s %6s %8s %8s\n", "pair", "psnr",
                "ssim", "lpips", "nrmse", "pixels");
  table += line;
  double sum_psnr = 0;
  for (auto [a, b] : pairs) {
    aqua::MetricReport r = aqua::consistency_eval(render_fn, ds.manifest.poses[a],
                                                  ds.manifest.poses[b], ds.depth[a],
                                                  ds.depth[b]);
    std::snprintf(line, sizeof(line), "%3d->%-3d  %8.3f %8.4f %6s %8.4f %8zu\n", a, b,
                  r.psnr, r.ssim, "n/a", r.nrmse, r.pixel_count);
    table += line;
    json jr = report_json(r);
    jr["pair"] = {a, b};
    rows.push_back(jr);
    sum_psnr += r.psnr;
  }
  std::snprintf(line, sizeof(line), "\nmean masked psnr over %zu pairs: %.3f dB (%s)\n",
                pairs.size(), sum_psnr / pairs.size(), rc.mode.c_str());
  table += line;
  std::fputs(table.c_str(), stdout);
  std::ofstream txt(rc.out + "/consistency.txt");
  txt << table;
  std::ofstream js(rc.out + "/consistency.json");
  js << json{{"mode", rc.mode}, {"rows", rows},
             {"mean_psnr", sum_psnr / pairs.size()}}.dump(2)
     << "\n";
  if (!txt || !js) throw aqua::io_error("failed writing consistency outputs to " + rc.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"water-attenuated radiance field pipeline"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string config_path;
  bool no_smoothing = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override it");
    sub->add_option("--seed", rc.train.seed, "RNG seed");
    sub->add_option("--out", rc.out, "output directory");
  };
  auto add_train_flags = [&](CLI::App* sub) {
    sub->add_option("--alpha", rc.train.alpha, "distribution-loss weight");
    sub->add_flag("--no-smoothing", no_smoothing,
                  "disable batch-averaged profile smoothing");
    sub->add_option("--iters", rc.train.total_iters, "training iterations");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  synth->add_option("--water-preset", rc.water_preset, "paper|custom");
  synth->add_option("--width", rc.width, "image width");
  synth->add_option("--height", rc.height, "image height");
  synth->add_option("--train-views", rc.train_views, "number of training poses");
  synth->add_option("--test-views", rc.test_views, "number of held-out poses");

  CLI::App* train = app.add_subcommand("train", "optimize the field on a dataset");
  add_common(train);
  add_train_flags(train);
  train->add_option("--data", rc.dataset, "dataset directory");

  CLI::App* render = app.add_subcommand("render", "render views from a checkpoint");
  add_common(render);
  add_train_flags(render);
  render->add_option("--data", rc.dataset, "dataset directory (poses and bounds)");
  render->add_option("--ckpt", rc.checkpoint, "checkpoint file");
  render->add_option("--mode", rc.mode, "degraded|restored");
  render->add_option("--split", rc.split, "train|test|all");

  CLI::App* eval = app.add_subcommand("eval", "score renders against ground truth");
  add_common(eval);
  add_train_flags(eval);
  eval->add_option("--data", rc.dataset, "dataset directory");
  eval->add_option("--ckpt", rc.checkpoint, "checkpoint file");

  CLI::App* cons = app.add_subcommand("consistency", "cross-view warp agreement");
  add_common(cons);
  add_train_flags(cons);
  cons->add_option("--data", rc.dataset, "dataset directory");
  cons->add_option("--ckpt", rc.checkpoint, "checkpoint file");
  cons->add_option("--mode", rc.mode, "degraded|restored");
  cons->add_option("--split", rc.split, "split used for default pose pairs");

  try {
    // parse twice: first pass only to learn --config, then config file as
    // defaults, then flags reapplied on top
    app.parse(argc, argv);
    if (!config_path.empty()) {
      RunConfig file_rc;
      load_config_file(config_path, file_rc);
      rc = file_rc;
      app.clear();
      app.parse(argc, argv);
    }
    if (no_smoothing) rc.train.smoothing_enabled = false;

    if (synth->parsed()) return cmd_synth(rc);
    if (train->parsed()) return cmd_train(rc);
    if (render->parsed()) return cmd_render(rc);
    if (eval->parsed()) return cmd_eval(rc);
    if (cons->parsed()) return cmd_consistency(rc);
    throw aqua::usage_error("no subcommand given");
  } catch (const CLI::ParseError& e) {
    int rc_cli = app.exit(e);
    return rc_cli == 0 ? 0 : 1;
  } catch (const aqua::usage_error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const aqua::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
