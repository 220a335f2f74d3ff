#include "pcflow/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "pcflow/completion.hpp"
#include "pcflow/parallel.hpp"
#include "pcflow/pointcloud_ops.hpp"
#include "pcflow/synthworld.hpp"

namespace pcflow {

using nlohmann::json;

namespace {

// --- tiny typed readers with JSON-path error reporting ---------------------

template <typename T>
T get_field(const json& j, const std::string& path, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(path + "." + key, "wrong type");
  }
}

const json& get_section(const json& j, const std::string& key, const json& empty) {
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ValidationError("." + key, "expected an object");
  return j.at(key);
}

void apply_override(json& j, const std::string& expr) {
  const auto eq = expr.find('=');
  if (eq == std::string::npos)
    throw ValidationError(".overrides", "expected key.path=value, got '" + expr + "'");
  const std::string path = expr.substr(0, eq);
  const std::string value = expr.substr(eq + 1);
  json* cur = &j;
  std::size_t pos = 0;
  while (pos != std::string::npos) {
    const std::size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw ValidationError("." + path, "bad override path");
    cur = &(*cur)[key];
    pos = dot == std::string::npos ? dot : dot + 1;
  }
  *cur = json::parse(value, nullptr, false);
  if (cur->is_discarded()) *cur = value;  // bare strings stay strings
}

void save_resolved(const PipelineConfig& config, const std::string& subcommand) {
  std::filesystem::create_directories(config.out_dir);
  std::ofstream out(config.out_dir / (subcommand + "_config.json"));
  out << config.resolved().dump(2) << "\n";
}

Scene load_scene_checked(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json"))
    throw std::runtime_error("scene not found: " + dir.string() +
                             " (run the synth subcommand first)");
  return load_scene(dir);
}

std::vector<SceneBundle> load_bundles(const PipelineConfig& config) {
  std::vector<SceneBundle> bundles;
  for (int i = 0; i < config.world.scenes; ++i) {
    SceneBundle b;
    const auto dir = scene_dir(config, i);
    b.scene = load_scene_checked(dir);
    if (!has_assets(dir))
      throw std::runtime_error("assets missing for " + dir.string() +
                               " (run aggregate/complete first)");
    b.assets = load_assets(dir);
    bundles.push_back(std::move(b));
  }
  return bundles;
}

std::string first_vehicle_track(const Scene& scene) {
  std::vector<std::string> tracks;
  for (const BBox3D& b : scene.frames.front().boxes)
    if (b.category == Category::kVehicle) tracks.push_back(b.track_id);
  std::sort(tracks.begin(), tracks.end());
  if (tracks.empty()) throw std::runtime_error("scene has no vehicle tracks");
  return tracks.front();
}

}  // namespace

json PipelineConfig::resolved() const {
  json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["out_dir"] = out_dir.string();
  j["world"] = {{"scenes", world.scenes},
                {"frames", world.frames},
                {"image_size", world.image_size},
                {"vehicles", world.vehicles},
                {"pedestrians", world.pedestrians},
                {"blocks", world.blocks},
                {"lidar_azimuths", world.lidar_azimuths},
                {"lidar_elevations", world.lidar_elevations},
                {"ground", world.ground}};
  j["assets"] = {{"completion_points", assets.completion_points},
                 {"deformable_window", assets.deformable_window}};
  j["render"] = {{"camera", render.camera}, {"splat_radius", render.splat_radius}};
  j["generator"] = generator.to_json();
  j["sft"] = {{"steps", sft.steps},
              {"batch", sft.batch},
              {"lr", sft.lr},
              {"val_every", sft.val_every},
              {"clips_per_scene", sft.clips_per_scene},
              {"holdout_fraction", sft.holdout_fraction}};
  j["prefs"] = {{"sample_steps", prefs.sample_steps},
                {"min_strength_gap", prefs.min_strength_gap}};
  j["reward"] = {{"tau", reward.tau}, {"min_unit_area", reward.min_unit_area}};
  j["train_reward"] = {{"epochs", train_reward.epochs},
                       {"batch", train_reward.batch},
                       {"lr", train_reward.lr},
                       {"weight_decay", train_reward.weight_decay},
                       {"warmup_fraction", train_reward.warmup_fraction},
                       {"holdout_fraction", train_reward.holdout_fraction},
                       {"pointwise", train_reward.pointwise}};
  j["rl"] = {{"steps", rl.steps},
             {"group_size", rl.group_size},
             {"beta", rl.beta},
             {"ema_alpha", rl.ema_alpha},
             {"lr", rl.lr},
             {"eval_every", rl.eval_every},
             {"sample_steps", rl.sample_steps},
             {"conditions", rl.conditions},
             {"families", rl.families}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError(".", "config must be a JSON object");
  if (!j.contains("seed")) throw ValidationError(".seed", "required field missing");
  PipelineConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw ValidationError(".seed", "expected an unsigned integer");
  }
  c.threads = get_field(j, "", "threads", c.threads);
  c.out_dir = get_field<std::string>(j, "", "out_dir", c.out_dir.string());

  const json empty = json::object();
  const json& w = get_section(j, "world", empty);
  c.world.scenes = get_field(w, ".world", "scenes", c.world.scenes);
  c.world.frames = get_field(w, ".world", "frames", c.world.frames);
  c.world.image_size = get_field(w, ".world", "image_size", c.world.image_size);
  c.world.vehicles = get_field(w, ".world", "vehicles", c.world.vehicles);
  c.world.pedestrians = get_field(w, ".world", "pedestrians", c.world.pedestrians);
  c.world.blocks = get_field(w, ".world", "blocks", c.world.blocks);
  c.world.lidar_azimuths = get_field(w, ".world", "lidar_azimuths", c.world.lidar_azimuths);
  c.world.lidar_elevations = get_field(w, ".world", "lidar_elevations", c.world.lidar_elevations);
  c.world.ground = get_field(w, ".world", "ground", c.world.ground);
  if (c.world.scenes < 1) throw ValidationError(".world.scenes", "must be >= 1");
  if (c.world.frames < 5) throw ValidationError(".world.frames", "must be >= 5");

  const json& a = get_section(j, "assets", empty);
  c.assets.completion_points = get_field(a, ".assets", "completion_points",
                                         c.assets.completion_points);
  c.assets.deformable_window = get_field(a, ".assets", "deformable_window",
                                         c.assets.deformable_window);

  const json& r = get_section(j, "render", empty);
  c.render.camera = get_field<std::string>(r, ".render", "camera", c.render.camera);
  c.render.splat_radius = get_field(r, ".render", "splat_radius", c.render.splat_radius);
  if (c.render.splat_radius < 0) throw ValidationError(".render.splat_radius", "must be >= 0");

  const json& g = get_section(j, "generator", empty);
  c.generator.frames = get_field(g, ".generator", "frames", c.generator.frames);
  c.generator.height = get_field(g, ".generator", "height", c.world.image_size);
  c.generator.width = get_field(g, ".generator", "width", c.world.image_size);
  c.generator.base_width = get_field(g, ".generator", "base_width", c.generator.base_width);
  c.generator.mid_width = get_field(g, ".generator", "mid_width", c.generator.mid_width);
  try {
    c.generator.validate();
  } catch (const std::exception& e) {
    throw ValidationError(".generator", e.what());
  }
  if (c.generator.frames > c.world.frames)
    throw ValidationError(".generator.frames", "clip longer than world.frames");
  if (c.generator.height != c.world.image_size || c.generator.width != c.world.image_size)
    throw ValidationError(".generator", "resolution must match world.image_size");

  const json& s = get_section(j, "sft", empty);
  c.sft.steps = get_field(s, ".sft", "steps", c.sft.steps);
  c.sft.batch = get_field(s, ".sft", "batch", c.sft.batch);
  c.sft.lr = get_field(s, ".sft", "lr", c.sft.lr);
  c.sft.val_every = get_field(s, ".sft", "val_every", c.sft.val_every);
  c.sft.clips_per_scene = get_field(s, ".sft", "clips_per_scene", c.sft.clips_per_scene);
  c.sft.holdout_fraction = get_field(s, ".sft", "holdout_fraction", c.sft.holdout_fraction);

  const json& p = get_section(j, "prefs", empty);
  c.prefs.sample_steps = get_field(p, ".prefs", "sample_steps", c.prefs.sample_steps);
  c.prefs.min_strength_gap = get_field(p, ".prefs", "min_strength_gap",
                                       c.prefs.min_strength_gap);

  const json& rw = get_section(j, "reward", empty);
  c.reward.tau = get_field(rw, ".reward", "tau", c.reward.tau);
  c.reward.min_unit_area = get_field(rw, ".reward", "min_unit_area", c.reward.min_unit_area);
  if (!(c.reward.tau > 0.0 && c.reward.tau < 1.0))
    throw ValidationError(".reward.tau", "must be in (0,1)");

  const json& tr = get_section(j, "train_reward", empty);
  c.train_reward.epochs = get_field(tr, ".train_reward", "epochs", c.train_reward.epochs);
  c.train_reward.batch = get_field(tr, ".train_reward", "batch", c.train_reward.batch);
  c.train_reward.lr = get_field(tr, ".train_reward", "lr", c.train_reward.lr);
  c.train_reward.weight_decay = get_field(tr, ".train_reward", "weight_decay",
                                          c.train_reward.weight_decay);
  c.train_reward.warmup_fraction = get_field(tr, ".train_reward", "warmup_fraction",
                                             c.train_reward.warmup_fraction);
  c.train_reward.holdout_fraction = get_field(tr, ".train_reward", "holdout_fraction",
                                              c.train_reward.holdout_fraction);
  c.train_reward.pointwise = get_field(tr, ".train_reward", "pointwise",
                                       c.train_reward.pointwise);

  const json& rj = get_section(j, "rl", empty);
  c.rl.steps = get_field(rj, ".rl", "steps", c.rl.steps);
  c.rl.group_size = get_field(rj, ".rl", "group_size", c.rl.group_size);
  c.rl.beta = get_field(rj, ".rl", "beta", c.rl.beta);
  c.rl.ema_alpha = get_field(rj, ".rl", "ema_alpha", c.rl.ema_alpha);
  c.rl.lr = get_field(rj, ".rl", "lr", c.rl.lr);
  c.rl.eval_every = get_field(rj, ".rl", "eval_every", c.rl.eval_every);
  c.rl.sample_steps = get_field(rj, ".rl", "sample_steps", c.rl.sample_steps);
  c.rl.conditions = get_field(rj, ".rl", "conditions", c.rl.conditions);
  c.rl.families = get_field(rj, ".rl", "families", c.rl.families);
  if (c.rl.group_size < 2) throw ValidationError(".rl.group_size", "must be >= 2");
  if (c.rl.families.empty()) throw ValidationError(".rl.families", "must not be empty");
  if (!(c.rl.ema_alpha >= 0.0 && c.rl.ema_alpha <= 1.0))
    throw ValidationError(".rl.ema_alpha", "must be in [0,1]");
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path,
                                    const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError(".", "cannot open config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError(".", "config is not valid JSON");
  for (const std::string& o : overrides) apply_override(j, o);
  return from_json(j);
}

std::filesystem::path scene_dir(const PipelineConfig& config, int index) {
  char name[32];
  std::snprintf(name, sizeof name, "scene_%03d", index);
  return config.out_dir / "scenes" / name;
}

void run_synth(const PipelineConfig& config) {
  save_resolved(config, "synth");
  const Rng master(config.seed);
  WorldGenParams params;
  params.frames = config.world.frames;
  params.image_size = config.world.image_size;
  params.vehicles = config.world.vehicles;
  params.pedestrians = config.world.pedestrians;
  params.blocks = config.world.blocks;
  params.lidar_azimuths = config.world.lidar_azimuths;
  params.lidar_elevations = config.world.lidar_elevations;
  params.ground = config.world.ground;
  for (int i = 0; i < config.world.scenes; ++i) {
    const std::uint64_t scene_seed = master.fork("scene").fork(std::uint64_t(i)).next_u64();
    const WorldSpec spec = make_random_world(params, scene_seed);
    const Scene scene = generate_scene(spec);
    save_scene(scene, scene_dir(config, i));
    std::cout << "synth: wrote " << scene_dir(config, i).string() << " (" << scene.frame_count()
              << " frames)\n";
  }
}

void run_aggregate(const PipelineConfig& config, bool complete) {
  save_resolved(config, complete ? "complete" : "aggregate");
  for (int i = 0; i < config.world.scenes; ++i) {
    const auto dir = scene_dir(config, i);
    const Scene scene = load_scene_checked(dir);
    AssetBuildParams params;
    params.completion_points = config.assets.completion_points;
    params.deformable_window = config.assets.deformable_window;
    params.complete_vehicles = complete;
    const SceneAssets assets = build_assets(scene, params);
    save_assets(assets, dir);
    std::cout << (complete ? "complete" : "aggregate") << ": " << dir.string() << " static="
              << assets.static_cloud.size() << " vehicles=" << assets.vehicles.size() << "\n";
  }
}

void run_render(const PipelineConfig& config, const std::filesystem::path& scene_path,
                const std::filesystem::path& edit_file, const std::filesystem::path& out,
                int first_frame, int clip_length) {
  save_resolved(config, "render");
  const Scene scene = load_scene_checked(scene_path);
  if (!has_assets(scene_path))
    throw std::runtime_error("assets missing for " + scene_path.string());
  const SceneAssets assets = load_assets(scene_path);
  EditSpec edits;
  if (!edit_file.empty()) {
    std::ifstream in(edit_file);
    if (!in) throw std::runtime_error("cannot open edit spec: " + edit_file.string());
    edits = EditSpec::from_json(json::parse(in));
  }
  const EditPlan plan = compile_edits(edits, scene);
  RenderParams rp;
  rp.camera = config.render.camera;
  rp.first_frame = first_frame;
  rp.clip_length = clip_length;
  rp.splat_radius = config.render.splat_radius;
  const ConditionSequence seq = render_sequence(scene, assets, plan, rp);
  save_condition_sequence(seq, out);
  std::cout << "render: wrote " << seq.length() << " condition frames to " << out.string()
            << "\n";
}

std::vector<SftItem> build_sft_dataset(const PipelineConfig& config,
                                       std::vector<SceneBundle>& bundles_out) {
  bundles_out = load_bundles(config);
  std::vector<SftItem> dataset;
  const int L = config.generator.frames;
  for (const SceneBundle& bundle : bundles_out) {
    const int T = bundle.scene.frame_count();
    const int clips = std::max(1, config.sft.clips_per_scene);
    for (int ci = 0; ci < clips; ++ci) {
      int start = 0;
      if (T > L && clips > 1) start = (ci * (T - L)) / (clips - 1);
      if (start + L > T) start = T - L;
      EditPlan plan;
      RenderParams rp;
      rp.camera = config.render.camera;
      rp.first_frame = start;
      rp.clip_length = L;
      rp.splat_radius = config.render.splat_radius;
      SftItem item;
      item.cond = render_sequence(bundle.scene, bundle.assets, plan, rp);
      item.target = ground_truth_video(bundle.scene, config.render.camera, start, L);
      dataset.push_back(std::move(item));
    }
  }
  return dataset;
}

void run_train_sft(const PipelineConfig& config) {
  save_resolved(config, "train-sft");
  std::vector<SceneBundle> bundles;
  const std::vector<SftItem> dataset = build_sft_dataset(config, bundles);
  const GeneratorNet net(config.generator);
  SftConfig sc;
  sc.steps = config.sft.steps;
  sc.batch = config.sft.batch;
  sc.lr = config.sft.lr;
  sc.val_every = config.sft.val_every;
  sc.seed = Rng(config.seed).fork("sft").next_u64();
  const SftResult result = sft_train(net, dataset, sc);
  std::filesystem::create_directories(config.out_dir / "checkpoints");
  save_generator(result.params, config.out_dir / "checkpoints" / "sft");
  write_curve_csv(config.out_dir / "sft_curve.csv", result.curve, "step,train_loss,val_loss");
  std::cout << "train-sft: val loss " << result.val_loss_first << " -> " << result.val_loss_last
            << " over " << sc.steps << " steps (" << dataset.size() << " clips)\n";
}

void run_build_prefs(const PipelineConfig& config) {
  save_resolved(config, "build-prefs");
  std::vector<SceneBundle> bundles = load_bundles(config);
  std::vector<const SceneBundle*> refs;
  for (const auto& b : bundles) refs.push_back(&b);
  const GeneratorNet net(config.generator);
  const GeneratorParams sft = load_generator(config.out_dir / "checkpoints" / "sft");
  BuildPrefsConfig bc;
  bc.seed = Rng(config.seed).fork("prefs").next_u64();
  bc.camera = config.render.camera;
  bc.sample_steps = config.prefs.sample_steps;
  bc.splat_radius = config.render.splat_radius;
  bc.min_strength_gap = config.prefs.min_strength_gap;
  bc.min_unit_area = config.reward.min_unit_area;
  const PreferenceDataset dataset = build_preference_dataset(refs, net, sft, bc);
  save_preference_dataset(dataset, config.out_dir / "prefs_data");
  std::cout << "build-prefs: " << dataset.pairs.size() << " pairs ("
            << dataset.skipped_clips.size() << " clips skipped)\n";
}

void run_train_reward(const PipelineConfig& config) {
  save_resolved(config, "train-reward");
  const PreferenceDataset dataset = load_preference_dataset(config.out_dir / "prefs_data");
  TrainPrefConfig tc;
  tc.epochs = config.train_reward.epochs;
  tc.batch = config.train_reward.batch;
  tc.lr = config.train_reward.lr;
  tc.weight_decay = config.train_reward.weight_decay;
  tc.warmup_fraction = config.train_reward.warmup_fraction;
  tc.holdout_fraction = config.train_reward.holdout_fraction;
  tc.seed = Rng(config.seed).fork("train-reward").next_u64();
  std::filesystem::create_directories(config.out_dir / "checkpoints");

  const PrefTrainResult pairwise = train_preference(dataset, tc);
  save_preference(pairwise.params, config.out_dir / "checkpoints" / "pairwise");
  write_curve_csv(config.out_dir / "reward_curve_pairwise.csv", pairwise.curve,
                  "epoch,train_acc,holdout_acc");
  std::cout << "train-reward: pairwise holdout accuracy " << pairwise.holdout_accuracy << "\n";

  if (config.train_reward.pointwise) {
    const PrefTrainResult pointwise = train_pointwise(dataset, tc);
    save_preference(pointwise.params, config.out_dir / "checkpoints" / "pointwise");
    write_curve_csv(config.out_dir / "reward_curve_pointwise.csv", pointwise.curve,
                    "epoch,train_acc,holdout_acc");
    std::cout << "train-reward: pointwise holdout accuracy " << pointwise.holdout_accuracy
              << "\n";
  }
}

EditSpec family_edit(const std::string& family, const Scene& scene, int clip_length) {
  EditSpec spec;
  ActorEdit edit;
  edit.first = 0;
  edit.last = clip_length - 1;
  if (family == "ego_shift") {
    EgoEdit ego;
    ego.lateral = 2.0;
    spec.ego = ego;
    return spec;
  }
  edit.track_id = first_vehicle_track(scene);
  if (family == "spin") {
    edit.kind = ActorEdit::Kind::kYawSpin;
    edit.amount = 9.0;
  } else if (family == "turn_left") {
    edit.kind = ActorEdit::Kind::kYawSpin;
    edit.amount = 3.0;
  } else if (family == "turn_right") {
    edit.kind = ActorEdit::Kind::kYawSpin;
    edit.amount = -3.0;
  } else if (family == "rollover") {
    edit.kind = ActorEdit::Kind::kRollover;
    edit.amount = 6.0;
    edit.cap_deg = 90.0;
  } else if (family == "speed2x") {
    edit.kind = ActorEdit::Kind::kSpeedScale;
    edit.amount = 2.0;
  } else if (family == "lateral_shift") {
    edit.kind = ActorEdit::Kind::kLateralShift;
    edit.amount = 2.0;
  } else {
    throw ValidationError(".rl.families", "unknown family '" + family + "'");
  }
  spec.actors.push_back(std::move(edit));
  return spec;
}

std::vector<OODCondition> build_ood_conditions(const PipelineConfig& config,
                                               std::vector<SceneBundle>& bundles_out) {
  bundles_out = load_bundles(config);
  std::vector<OODCondition> conditions;
  const int L = config.generator.frames;
  const int n_fam = int(config.rl.families.size());
  for (int i = 0; i < config.rl.conditions; ++i) {
    const std::string& family = config.rl.families[std::size_t(i % n_fam)];
    const int si = (i / n_fam) % int(bundles_out.size());
    const SceneBundle& bundle = bundles_out[std::size_t(si)];
    const EditSpec edits = family_edit(family, bundle.scene, L);
    const EditPlan plan = compile_edits(edits, bundle.scene);
    RenderParams rp;
    rp.camera = config.render.camera;
    rp.first_frame = 0;
    rp.clip_length = L;
    rp.splat_radius = config.render.splat_radius;
    OODCondition cond;
    cond.name = family + "_s" + std::to_string(si) + "_c" + std::to_string(i);
    cond.cond = render_sequence(bundle.scene, bundle.assets, plan, rp);
    cond.units = extract_units(bundle.scene, plan, config.render.camera, 0, L,
                               config.reward.min_unit_area);
    cond.first_frame = 0;
    conditions.push_back(std::move(cond));
  }
  return conditions;
}

void run_rl_train(const PipelineConfig& config) {
  save_resolved(config, "rl-train");
  std::vector<SceneBundle> bundles;
  const std::vector<OODCondition> conditions = build_ood_conditions(config, bundles);
  const GeneratorNet net(config.generator);
  const GeneratorParams sft = load_generator(config.out_dir / "checkpoints" / "sft");
  const PreferenceParams prefs =
      load_preference(config.out_dir / "checkpoints" / "pairwise", "pairwise-v1");
  const PairwiseModel model(prefs.config);

  RlConfig rc;
  rc.steps = config.rl.steps;
  rc.group_size = config.rl.group_size;
  rc.beta = config.rl.beta;
  rc.ema_alpha = config.rl.ema_alpha;
  rc.lr = config.rl.lr;
  rc.tau = config.reward.tau;
  rc.eval_every = config.rl.eval_every;
  rc.sample_steps = config.rl.sample_steps;
  rc.seed = Rng(config.seed).fork("rl").next_u64();
  rc.eval_seed = 0;  // fixed-seed paired evaluation

  const RlResult result =
      rl_train(net, sft, conditions, model, prefs, rc, config.out_dir / "rl");
  save_generator(result.params, config.out_dir / "checkpoints" / "rl");
  write_eval_csv(config.out_dir / "rl" / "curves.csv", conditions, result.eval_rows);
  for (const std::string& line : result.dropped_conditions)
    std::cout << "rl-train: dropped " << line << "\n";
  const auto& last = result.eval_rows.back();
  std::cout << "rl-train: overall E " << result.eval_rows.front().back() << " -> " << last.back()
            << " after " << rc.steps << " steps\n";
}

void run_eval(const PipelineConfig& config, const std::filesystem::path& ckpt_a,
              const std::filesystem::path& ckpt_b, const std::filesystem::path& out_csv) {
  save_resolved(config, "eval");
  std::vector<SceneBundle> bundles;
  const std::vector<OODCondition> conditions = build_ood_conditions(config, bundles);
  const GeneratorNet net(config.generator);
  const GeneratorParams a = load_generator(ckpt_a);
  const GeneratorParams b = load_generator(ckpt_b);
  const PreferenceParams prefs =
      load_preference(config.out_dir / "checkpoints" / "pairwise", "pairwise-v1");
  const PairwiseModel model(prefs.config);

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv.string());
  out << "condition,E\n";
  double sum = 0.0;
  int m = 0;
  char buf[64];
  for (const OODCondition& cond : conditions) {
    if (cond.units.empty()) continue;
    const VideoTensor va = sample_video(net, a, cond.cond, 0, config.rl.sample_steps);
    const VideoTensor vb = sample_video(net, b, cond.cond, 0, config.rl.sample_steps);
    const double e = eval_score(va, vb, cond.units, cond.first_frame, model, prefs);
    std::snprintf(buf, sizeof buf, "%.17g", e);
    out << cond.name << "," << buf << "\n";
    sum += e;
    ++m;
  }
  std::snprintf(buf, sizeof buf, "%.17g", m > 0 ? sum / m : 0.5);
  out << "overall," << buf << "\n";
  std::cout << "eval: overall E = " << (m > 0 ? sum / m : 0.5) << " over " << m
            << " conditions\n";
}

void run_demo(const PipelineConfig& config) {
  run_synth(config);
  run_aggregate(config, false);
  run_aggregate(config, true);
  // One edited clip rendered to disk so the render surface is exercised.
  {
    const Scene scene = load_scene_checked(scene_dir(config, 0));
    const EditSpec edits = family_edit("spin", scene, config.generator.frames);
    const auto edit_path = config.out_dir / "demo_edit.json";
    std::ofstream out(edit_path);
    out << edits.to_json().dump(2) << "\n";
    run_render(config, scene_dir(config, 0), edit_path, config.out_dir / "clips" / "demo_spin", 0,
               config.generator.frames);
  }
  run_train_sft(config);
  run_build_prefs(config);
  run_train_reward(config);
  run_rl_train(config);
  run_eval(config, config.out_dir / "checkpoints" / "rl", config.out_dir / "checkpoints" / "sft",
           config.out_dir / "eval.csv");

  // Coverage assertion: every stage must have left its artifact.
  const std::filesystem::path expected[] = {
      scene_dir(config, 0) / "manifest.json",
      scene_dir(config, 0) / "assets" / "assets.json",
      config.out_dir / "clips" / "demo_spin" / "condition.json",
      config.out_dir / "checkpoints" / "sft.f32",
      config.out_dir / "sft_curve.csv",
      config.out_dir / "prefs_data" / "pairs.json",
      config.out_dir / "checkpoints" / "pairwise.f32",
      config.out_dir / "checkpoints" / "rl.f32",
      config.out_dir / "rl" / "curves.csv",
      config.out_dir / "eval.csv",
  };
  for (const auto& path : expected)
    if (!std::filesystem::exists(path))
      throw std::runtime_error("demo: expected artifact missing: " + path.string());
  std::cout << "demo: all stages complete under " << config.out_dir.string() << "\n";
}

}  // namespace pcflow
