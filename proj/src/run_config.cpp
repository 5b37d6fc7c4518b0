#include "sfmap/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace sfmap {

using detail::json;

namespace {

const char* finger_key(int f) { return finger_name(Finger(f)); }

json confusion_to_json(const ConfusionMatrix& m) {
    json rows = json::array();
    for (const auto& row : m) rows.push_back(json(row));
    return rows;
}

ConfusionMatrix confusion_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4)
        throw ConfigError("sensors.confusion: expected 4 rows");
    ConfusionMatrix m{};
    for (int r = 0; r < 4; ++r) {
        if (!j[size_t(r)].is_array() || j[size_t(r)].size() != 4)
            throw ConfigError("sensors.confusion: expected 4 entries per row");
        for (int c = 0; c < 4; ++c) m[size_t(r)][size_t(c)] = j[size_t(r)][size_t(c)].get<double>();
    }
    return m;
}

}  // namespace

void RunConfig::validate() const {
    if (scene_path.empty()) throw ConfigError("config: scene path is required");
    if (steps <= 0) throw ConfigError("config: steps must be positive");
    if (snapshot_every <= 0) throw ConfigError("config: snapshot_every must be positive");
    if (batch_size <= 0) throw ConfigError("config: batch_size must be positive");
    if (!(learning_rate > 0.0f)) throw ConfigError("config: learning_rate must be positive");
    if (weight_decay < 0.0f) throw ConfigError("config: weight_decay must be non-negative");
    if (train_steps_per_timestep <= 0)
        throw ConfigError("config: train_steps_per_timestep must be positive");
    if (early_stop_patience < 0)
        throw ConfigError("config: early_stop_patience must be non-negative");
    if (eval_points <= 0) throw ConfigError("config: eval_points must be positive");
    if (replay_capacity <= 0) throw ConfigError("config: replay_capacity must be positive");
    if (free_space_per_contact < 0)
        throw ConfigError("config: free_space_per_contact must be non-negative");
    if (global_freespace_per_step < 0)
        throw ConfigError("config: global_freespace_per_step must be non-negative");
    if (export_resolution < 16)
        throw ConfigError("config: export.resolution must be >= 16");
    if (sim.sigma_pos < 0.0) throw ConfigError("config: sim.sigma_pos must be non-negative");
    if (!(sim.rotations > 0.0)) throw ConfigError("config: sim.rotations must be positive");
    if (!(sim.azimuth_halfwidth_deg > 0.0))
        throw ConfigError("config: sim.azimuth_halfwidth_deg must be positive");
    if (sim.band_jitter < 0.0) throw ConfigError("config: sim.band_jitter must be non-negative");
    loss.validate();
    field.validate();
    for (const auto& s : sensors) {
        try {
            s.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    detail::check_keys(j,
                       {"scene", "seed", "steps", "snapshot_every", "batch_size",
                        "learning_rate", "weight_decay", "train_steps_per_timestep",
                        "early_stop_patience", "eval_points", "replay_capacity",
                        "free_space_per_contact", "global_freespace_per_step", "loss",
                        "field", "encoding", "sensors", "sim", "export"},
                       "");

    RunConfig c;
    c.scene_path = detail::get_or<std::string>(j, "scene", "");
    c.seed = detail::get_or<uint64_t>(j, "seed", c.seed);
    c.steps = detail::get_or<int>(j, "steps", c.steps);
    c.snapshot_every = detail::get_or<int>(j, "snapshot_every", c.snapshot_every);
    c.batch_size = detail::get_or<int>(j, "batch_size", c.batch_size);
    c.learning_rate = detail::get_or<float>(j, "learning_rate", c.learning_rate);
    c.weight_decay = detail::get_or<float>(j, "weight_decay", c.weight_decay);
    c.train_steps_per_timestep =
        detail::get_or<int>(j, "train_steps_per_timestep", c.train_steps_per_timestep);
    c.early_stop_patience =
        detail::get_or<int>(j, "early_stop_patience", c.early_stop_patience);
    c.eval_points = detail::get_or<int>(j, "eval_points", c.eval_points);
    c.replay_capacity = detail::get_or<int>(j, "replay_capacity", c.replay_capacity);
    c.free_space_per_contact =
        detail::get_or<int>(j, "free_space_per_contact", c.free_space_per_contact);
    c.global_freespace_per_step =
        detail::get_or<int>(j, "global_freespace_per_step", c.global_freespace_per_step);

    if (j.contains("loss")) {
        const json& l = j.at("loss");
        detail::check_keys(l, {"sdf_weight", "material_weight", "truncation", "eikonal_weight"},
                           "loss");
        c.loss.sdf_weight = detail::get_or<float>(l, "sdf_weight", c.loss.sdf_weight);
        c.loss.material_weight =
            detail::get_or<float>(l, "material_weight", c.loss.material_weight);
        c.loss.truncation = detail::get_or<float>(l, "truncation", c.loss.truncation);
        c.loss.eikonal_weight =
            detail::get_or<float>(l, "eikonal_weight", c.loss.eikonal_weight);
    }
    if (j.contains("field")) {
        const json& f = j.at("field");
        detail::check_keys(f, {"use_feature_concat", "material_input", "sh_bands", "num_classes"},
                           "field");
        c.field.use_feature_concat =
            detail::get_or<bool>(f, "use_feature_concat", c.field.use_feature_concat);
        c.field.sh_bands = detail::get_or<int>(f, "sh_bands", c.field.sh_bands);
        c.field.num_classes = detail::get_or<int>(f, "num_classes", c.field.num_classes);
        std::string mi = detail::get_or<std::string>(f, "material_input", "sh");
        if (mi == "sh")
            c.field.material_input = MaterialInput::kSh;
        else if (mi == "raw_point")
            c.field.material_input = MaterialInput::kRawPoint;
        else
            throw ConfigError("field.material_input: expected 'sh' or 'raw_point'");
    }
    if (j.contains("encoding")) {
        const json& e = j.at("encoding");
        detail::check_keys(e,
                           {"levels", "features_per_level", "base_resolution",
                            "per_level_scale", "log2_hashmap_size"},
                           "encoding");
        c.field.grid.levels = detail::get_or<int>(e, "levels", c.field.grid.levels);
        c.field.grid.features_per_level =
            detail::get_or<int>(e, "features_per_level", c.field.grid.features_per_level);
        c.field.grid.base_resolution =
            detail::get_or<int>(e, "base_resolution", c.field.grid.base_resolution);
        c.field.grid.per_level_scale =
            detail::get_or<double>(e, "per_level_scale", c.field.grid.per_level_scale);
        c.field.grid.log2_hashmap_size =
            detail::get_or<int>(e, "log2_hashmap_size", c.field.grid.log2_hashmap_size);
    }
    if (j.contains("sensors")) {
        const json& s = j.at("sensors");
        if (!s.is_array() || s.size() != 4)
            throw ConfigError("sensors: expected an array of 4 profiles");
        for (int f = 0; f < 4; ++f) {
            const json& sj = s[size_t(f)];
            detail::check_keys(sj, {"finger", "per_class_accuracy", "confusion", "contact_rate"},
                               "sensors");
            SensorProfile& prof = c.sensors[size_t(f)];
            std::string fname = detail::get_or<std::string>(sj, "finger", finger_key(f));
            if (fname != finger_key(f))
                throw ConfigError("sensors: profiles must be listed in order index, middle, ring, thumb");
            prof.finger = Finger(f);
            if (sj.contains("per_class_accuracy")) {
                const json& a = sj.at("per_class_accuracy");
                if (!a.is_array() || a.size() != 4)
                    throw ConfigError("sensors.per_class_accuracy: expected 4 values");
                for (int k = 0; k < 4; ++k) prof.per_class_accuracy[size_t(k)] = a[size_t(k)].get<double>();
                prof.confusion = confusion_from_accuracy(prof.per_class_accuracy);
            }
            if (sj.contains("confusion")) prof.confusion = confusion_from_json(sj.at("confusion"));
            prof.contact_rate = detail::get_or<double>(sj, "contact_rate", prof.contact_rate);
        }
    }
    if (j.contains("sim")) {
        const json& s = j.at("sim");
        detail::check_keys(
            s, {"sigma_pos", "rotations", "azimuth_halfwidth_deg", "band_jitter"}, "sim");
        c.sim.sigma_pos = detail::get_or<double>(s, "sigma_pos", c.sim.sigma_pos);
        c.sim.rotations = detail::get_or<double>(s, "rotations", c.sim.rotations);
        c.sim.azimuth_halfwidth_deg =
            detail::get_or<double>(s, "azimuth_halfwidth_deg", c.sim.azimuth_halfwidth_deg);
        c.sim.band_jitter = detail::get_or<double>(s, "band_jitter", c.sim.band_jitter);
    }
    if (j.contains("export")) {
        const json& e = j.at("export");
        detail::check_keys(e, {"snapshot_ply", "resolution"}, "export");
        c.export_snapshot_ply = detail::get_or<bool>(e, "snapshot_ply", c.export_snapshot_ply);
        c.export_resolution = detail::get_or<int>(e, "resolution", c.export_resolution);
    }
    c.sim.steps = c.steps;
    c.validate();
    return c;
}

std::string RunConfig::to_json_text() const {
    json j;
    j["scene"] = scene_path;
    j["seed"] = seed;
    j["steps"] = steps;
    j["snapshot_every"] = snapshot_every;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["weight_decay"] = weight_decay;
    j["train_steps_per_timestep"] = train_steps_per_timestep;
    j["early_stop_patience"] = early_stop_patience;
    j["eval_points"] = eval_points;
    j["replay_capacity"] = replay_capacity;
    j["free_space_per_contact"] = free_space_per_contact;
    j["global_freespace_per_step"] = global_freespace_per_step;
    j["loss"] = {{"sdf_weight", loss.sdf_weight},
                 {"material_weight", loss.material_weight},
                 {"truncation", loss.truncation},
                 {"eikonal_weight", loss.eikonal_weight}};
    j["field"] = {
        {"use_feature_concat", field.use_feature_concat},
        {"material_input", field.material_input == MaterialInput::kSh ? "sh" : "raw_point"},
        {"sh_bands", field.sh_bands},
        {"num_classes", field.num_classes}};
    j["encoding"] = {{"levels", field.grid.levels},
                     {"features_per_level", field.grid.features_per_level},
                     {"base_resolution", field.grid.base_resolution},
                     {"per_level_scale", field.grid.per_level_scale},
                     {"log2_hashmap_size", field.grid.log2_hashmap_size}};
    j["sensors"] = json::array();
    for (int f = 0; f < 4; ++f) {
        const SensorProfile& p = sensors[size_t(f)];
        j["sensors"].push_back({{"finger", finger_key(f)},
                                {"per_class_accuracy", json(p.per_class_accuracy)},
                                {"confusion", confusion_to_json(p.confusion)},
                                {"contact_rate", p.contact_rate}});
    }
    j["sim"] = {{"sigma_pos", sim.sigma_pos},
                {"rotations", sim.rotations},
                {"azimuth_halfwidth_deg", sim.azimuth_halfwidth_deg},
                {"band_jitter", sim.band_jitter}};
    j["export"] = {{"snapshot_ply", export_snapshot_ply}, {"resolution", export_resolution}};
    return j.dump(2) + "\n";
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return from_json_text(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (in '" + path + "')");
    }
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("config: cannot write '" + path + "'");
    out << to_json_text();
    if (!out) throw IoError("config: write failed for '" + path + "'");
}

}  // namespace sfmap
