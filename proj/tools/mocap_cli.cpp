#include <cstdio>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "CLI11.hpp"
#include "mocap/body_model.hpp"
#include "mocap/calibration.hpp"
#include "mocap/error.hpp"
#include "mocap/json_util.hpp"
#include "mocap/parallel.hpp"
#include "mocap/scene_io.hpp"
#include "mocap/synth.hpp"

namespace {

using mocap::ErrorCode;
using mocap::Json;

// Scalar options take the last occurrence so values injected from a config
// file are overridden by explicit command-line flags.
template <class T>
CLI::Option* scalar(CLI::App* cmd, const std::string& name, T& var, const std::string& desc) {
  return cmd->add_option(name, var, desc)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

bool user_passed(const std::string& flag, int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string t = argv[i];
    if (t == flag || t.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// A config file maps subcommand names to option maps; keys are the long
// option names without the leading dashes. Values become synthetic argv
// tokens inserted ahead of the user's flags, so the command line wins any
// disagreement. Sections for other commands are checked for key validity but
// contribute nothing to this invocation.
std::vector<std::string> config_args(const CLI::App& app, const std::string& path,
                                     const std::string& command, int argc, char** argv) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    mocap::raise(ErrorCode::InputNotFound, "config file " + path);
  } catch (const YAML::Exception& e) {
    mocap::raise(ErrorCode::ConfigInvalid, path + ": " + std::string(e.what()));
  }
  if (root.IsNull()) return {};
  if (!root.IsMap())
    mocap::raise(ErrorCode::ConfigInvalid,
                 path + ": top level must map subcommand names to option maps");

  std::vector<std::string> out;
  for (const auto& section : root) {
    const std::string name = section.first.as<std::string>();
    const auto subs =
        app.get_subcommands([&](const CLI::App* s) { return s->get_name() == name; });
    if (subs.empty())
      mocap::raise(ErrorCode::ConfigInvalid,
                   path + ": '" + name + "' is not a known command");
    if (!section.second.IsMap())
      mocap::raise(ErrorCode::ConfigInvalid, path + ": section '" + name +
                                                 "' must be a map of options");
    for (const auto& kv : section.second) {
      const std::string key = kv.first.as<std::string>();
      const std::string flag = "--" + key;
      if (subs.front()->get_option_no_throw(flag) == nullptr)
        mocap::raise(ErrorCode::ConfigInvalid, path + ": '" + name + "." + key +
                                                   "' is not an option of " + name);
      if (name != command || user_passed(flag, argc, argv)) continue;
      if (kv.second.IsSequence()) {
        for (const auto& item : kv.second) {
          out.push_back(flag);
          out.push_back(item.as<std::string>());
        }
      } else if (kv.second.IsScalar()) {
        out.push_back(flag);
        out.push_back(kv.second.as<std::string>());
      } else {
        mocap::raise(ErrorCode::ConfigInvalid,
                     path + ": '" + name + "." + key + "' must be a scalar or a list");
      }
    }
  }
  return out;
}

struct CommonArgs {
  std::string config_path;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& c) {
  scalar(cmd, "--config", c.config_path, "YAML config file; flags override its values");
  scalar(cmd, "--threads", c.threads, "Worker cap for parallel kernels (0 = hardware)");
}

struct SynthArgs {
  mocap::SynthConfig cfg;
  std::string scene_path;
  std::string gt_path;
};

struct CalibrateArgs {
  mocap::CalibrationOptions opts;
  std::string scene_path;
  std::string cameras_path;
};

Json calibration_options_json(const mocap::CalibrationOptions& o) {
  return Json{{"theta_stand", o.theta_stand}, {"gamma_max_deg", o.gamma_max_deg},
              {"ransac_iters", o.ransac_iters}, {"min_line_px", o.min_line_px},
              {"match_gate", o.match_gate},   {"seed", o.seed}};
}

void run_synth(const SynthArgs& a) {
  a.cfg.validate();
  const mocap::KinematicTree tree = mocap::KinematicTree::default_tree();
  mocap::SynthResult sr = mocap::synth_generate(tree, a.cfg);
  Json prov{{"command", "synth"},
            {"options", a.cfg.to_json()},
            {"outputs", Json{{"scene", a.scene_path}, {"gt", a.gt_path}}}};
  sr.scene.config = prov;
  sr.scene.save(a.scene_path);
  if (!a.gt_path.empty()) sr.gt.save(a.gt_path);
  long dets = 0;
  for (const auto& view : sr.scene.detections)
    for (const auto& frame : view) dets += static_cast<long>(frame.size());
  std::printf("synth: %d views, %d actors, %d frames, %ld detections -> %s\n",
              a.cfg.views, a.cfg.actors, a.cfg.frames, dets, a.scene_path.c_str());
}

void run_calibrate(const CalibrateArgs& a) {
  const mocap::SceneFile scene = mocap::SceneFile::load(a.scene_path);
  scene.validate();
  const mocap::KinematicTree tree = mocap::KinematicTree::default_tree();
  const std::vector<mocap::Camera> cams = mocap::calibrate_cameras(tree, scene, a.opts);
  Json prov{{"command", "calibrate"},
            {"options", calibration_options_json(a.opts)},
            {"inputs", Json{{"scene", a.scene_path}}}};
  mocap::save_cameras(a.cameras_path, cams, prov);
  for (size_t v = 0; v < cams.size(); ++v)
    std::printf("calibrate: view %zu focal %.2f x %.2f px\n", v, cams[v].intr.fx,
                cams[v].intr.fy);
  std::printf("calibrate: %zu cameras -> %s\n", cams.size(), a.cameras_path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-person motion and camera recovery from 2D keypoint detections"};
  app.require_subcommand(1);

  CommonArgs common;
  SynthArgs synth;
  CalibrateArgs calib;

  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
  add_common(synth_cmd, common);
  scalar(synth_cmd, "--scene", synth.scene_path, "Output detections file")->required();
  scalar(synth_cmd, "--gt", synth.gt_path, "Output ground-truth file");
  scalar(synth_cmd, "--seed", synth.cfg.seed, "RNG seed")->required();
  scalar(synth_cmd, "--views", synth.cfg.views, "Camera count");
  scalar(synth_cmd, "--actors", synth.cfg.actors, "Actor count");
  scalar(synth_cmd, "--frames", synth.cfg.frames, "Frame count");
  scalar(synth_cmd, "--fps", synth.cfg.fps, "Frames per second");
  scalar(synth_cmd, "--width", synth.cfg.width, "Image width px");
  scalar(synth_cmd, "--height", synth.cfg.height, "Image height px");
  scalar(synth_cmd, "--ring-radius-min", synth.cfg.ring_radius_min, "Camera ring radius lower bound m");
  scalar(synth_cmd, "--ring-radius-max", synth.cfg.ring_radius_max, "Camera ring radius upper bound m");
  scalar(synth_cmd, "--cam-height-min", synth.cfg.cam_height_min, "Camera height lower bound m");
  scalar(synth_cmd, "--cam-height-max", synth.cfg.cam_height_max, "Camera height upper bound m");
  scalar(synth_cmd, "--focal-min", synth.cfg.focal_min, "Focal length lower bound px");
  scalar(synth_cmd, "--focal-max", synth.cfg.focal_max, "Focal length upper bound px");
  scalar(synth_cmd, "--motion-source", synth.cfg.motion_source,
         "procedural | rest | external");
  synth_cmd->add_option("--styles", synth.cfg.styles, "Motion styles cycled over actors");
  scalar(synth_cmd, "--beta-sigma", synth.cfg.beta_sigma, "Body shape spread");
  scalar(synth_cmd, "--spawn-radius", synth.cfg.spawn_radius,
         "Actor placement radius m (0 = auto)");
  scalar(synth_cmd, "--pixel-sigma", synth.cfg.pixel_sigma, "Keypoint noise px");
  scalar(synth_cmd, "--dropout", synth.cfg.dropout, "Per-keypoint dropout probability");
  scalar(synth_cmd, "--shuffle-prob", synth.cfg.shuffle_prob,
         "Per-frame detection shuffle probability");
  scalar(synth_cmd, "--false-positive-rate", synth.cfg.false_positive_rate,
         "Spurious detection rate");
  scalar(synth_cmd, "--init3d-sigma", synth.cfg.init3d_sigma, "3D initialization noise m");
  synth_cmd->callback([&] {
    mocap::set_max_threads(common.threads);
    run_synth(synth);
  });

  CLI::App* calib_cmd = app.add_subcommand(
      "calibrate", "Recover camera intrinsics and extrinsics from standing people");
  add_common(calib_cmd, common);
  scalar(calib_cmd, "--scene", calib.scene_path, "Input detections file")->required();
  scalar(calib_cmd, "--cameras", calib.cameras_path, "Output cameras file")->required();
  scalar(calib_cmd, "--theta-stand", calib.opts.theta_stand,
         "Standing pose angle tolerance rad");
  scalar(calib_cmd, "--gamma-max-deg", calib.opts.gamma_max_deg,
         "Vanishing point agreement cone deg");
  scalar(calib_cmd, "--ransac-iters", calib.opts.ransac_iters, "RANSAC iterations");
  scalar(calib_cmd, "--min-line-px", calib.opts.min_line_px,
         "Minimum standing line length px");
  scalar(calib_cmd, "--match-gate", calib.opts.match_gate,
         "Cross-view person match gate m");
  scalar(calib_cmd, "--seed", calib.opts.seed, "RNG seed");
  calib_cmd->callback([&] {
    mocap::set_max_threads(common.threads);
    run_calibrate(calib);
  });

  std::string sub;
  std::string cfg_path;
  for (int i = 1; i < argc; ++i) {
    const std::string t = argv[i];
    if (sub.empty() && !t.empty() && t[0] != '-') {
      sub = t;
    } else if (t == "--config" && i + 1 < argc) {
      cfg_path = argv[i + 1];
    } else if (t.rfind("--config=", 0) == 0) {
      cfg_path = t.substr(9);
    }
  }

  try {
    std::vector<std::string> tokens;
    tokens.emplace_back(argv[0]);
    bool injected = false;
    for (int i = 1; i < argc; ++i) {
      tokens.emplace_back(argv[i]);
      if (!injected && !cfg_path.empty() && tokens.back() == sub) {
        for (std::string& t : config_args(app, cfg_path, sub, argc, argv))
          tokens.push_back(std::move(t));
        injected = true;
      }
    }
    std::vector<const char*> cargv;
    cargv.reserve(tokens.size());
    for (const std::string& t : tokens) cargv.push_back(t.c_str());
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const mocap::Error& e) {
    const Json j{{"error", mocap::error_code_name(e.code())},
                 {"message", e.what()},
                 {"stage", sub.empty() ? "cli" : sub}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
    return mocap::error_exit_code(e.code());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return 0;
}
