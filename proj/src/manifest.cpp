#include "aqua/manifest.hpp"

#include <fstream>

#include "json.hpp"

namespace aqua {

using nlohmann::json;

void WaterParams::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (beta_d[c] < 0 || beta_b[c] < 0) throw input_error("water coefficients must be >= 0");
    if (b_inf[c] < 0 || b_inf[c] > 1) throw input_error("ambient light must be in [0, 1]");
  }
}

namespace {
json pose_to_json(const CameraPose& p) {
  json j;
  j["rotation"] = std::vector<double>(p.rotation.m, p.rotation.m + 9);
  j["translation"] = {p.translation.x, p.translation.y, p.translation.z};
  j["fx"] = p.fx;
  j["fy"] = p.fy;
  j["cx"] = p.cx;
  j["cy"] = p.cy;
  j["width"] = p.width;
  j["height"] = p.height;
  return j;
}

CameraPose pose_from_json(const json& j) {
  CameraPose p;
  auto r = j.at("rotation").get<std::vector<double>>();
  if (r.size() != 9) throw io_error("manifest: rotation must have 9 entries");
  std::copy(r.begin(), r.end(), p.rotation.m);
  auto t = j.at("translation").get<std::vector<double>>();
  if (t.size() != 3) throw io_error("manifest: translation must have 3 entries");
  p.translation = {t[0], t[1], t[2]};
  p.fx = j.at("fx");
  p.fy = j.at("fy");
  p.cx = j.at("cx");
  p.cy = j.at("cy");
  p.width = j.at("width");
  p.height = j.at("height");
  return p;
}
}  // namespace

void DatasetManifest::save(const std::string& path) const {
  json j;
  j["format"] = "aquafield-dataset";
  j["version"] = 1;
  j["width"] = width;
  j["height"] = height;
  j["t_near"] = t_near;
  j["t_far"] = t_far;
  j["seed"] = seed;
  j["water"]["beta_d"] = water.beta_d;
  j["water"]["beta_b"] = water.beta_b;
  j["water"]["b_inf"] = water.b_inf;
  j["poses"] = json::array();
  for (const auto& p : poses) j["poses"].push_back(pose_to_json(p));
  j["frames"] = json::array();
  for (const auto& f : frames)
    j["frames"].push_back({{"clean", f.clean},
                           {"depth", f.depth},
                           {"degraded", f.degraded},
                           {"he", f.he},
                           {"split", f.split}});
  std::ofstream os(path);
  if (!os) throw io_error("cannot write manifest: " + path);
  os << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open manifest: " + path);
  json j = json::parse(is);
  if (j.value("format", "") != "aquafield-dataset")
    throw io_error("not an aquafield dataset manifest: " + path);
  DatasetManifest m;
  m.width = j.at("width");
  m.height = j.at("height");
  m.t_near = j.at("t_near");
  m.t_far = j.at("t_far");
  m.seed = j.at("seed");
  m.water.beta_d = j.at("water").at("beta_d");
  m.water.beta_b = j.at("water").at("beta_b");
  m.water.b_inf = j.at("water").at("b_inf");
  for (const auto& pj : j.at("poses")) m.poses.push_back(pose_from_json(pj));
  for (const auto& fj : j.at("frames"))
    m.frames.push_back({fj.at("clean"), fj.at("depth"), fj.at("degraded"), fj.at("he"),
                        fj.at("split")});
  if (m.frames.size() != m.poses.size())
    throw io_error("manifest: frame/pose count mismatch: " + path);
  return m;
}

Dataset load_dataset(const std::string& dir) {
  Dataset d;
  d.dir = dir;
  d.manifest = DatasetManifest::load(dir + "/manifest.json");
  const auto& m = d.manifest;
  for (size_t i = 0; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    d.clean.push_back(read_png(dir + "/" + f.clean));
    d.degraded.push_back(read_png(dir + "/" + f.degraded));
    d.he.push_back(read_png(dir + "/" + f.he));
    d.depth.push_back(read_pfm(dir + "/" + f.depth));
    if (f.split == "train")
      d.train_ids.push_back(static_cast<int>(i));
    else
      d.test_ids.push_back(static_cast<int>(i));
  }
  return d;
}

}  // namespace aqua
