#include "nsde/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace nsde {

using json = nlohmann::ordered_json;

namespace {

json net_to_json(const MlpParams& p) {
    const NetSpec& s = p.spec();
    json activations = json::array();
    for (std::size_t k = 0; k < s.hidden_dims.size(); ++k) activations.push_back(to_string(p.activation(k)));
    json j;
    j["input_dim"] = s.input_dim;
    j["hidden_dims"] = s.hidden_dims;
    j["output_dim"] = s.output_dim;
    j["activations"] = activations;
    j["head"] = to_string(s.head);
    j["floor"] = s.floor;
    j["init_seed"] = s.init_seed;
    j["parameters"] = std::vector<double>(p.values().begin(), p.values().end());
    return j;
}

MlpParams net_from_json(const json& j, const char* name) {
    try {
        NetSpec s;
        s.input_dim = j.at("input_dim").get<std::size_t>();
        s.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
        s.output_dim = j.at("output_dim").get<std::size_t>();
        s.head = parse_head(j.at("head").get<std::string>());
        s.floor = j.at("floor").get<double>();
        s.init_seed = j.at("init_seed").get<std::uint64_t>();
        const auto acts = j.at("activations").get<std::vector<std::string>>();
        if (acts.size() != s.hidden_dims.size()) throw Error("one activation per hidden layer expected");
        if (!acts.empty()) s.activation = parse_activation(acts.front());
        MlpParams p(s);
        for (std::size_t k = 0; k < acts.size(); ++k) p.set_activation(k, parse_activation(acts[k]));
        p.assign(j.at("parameters").get<std::vector<double>>());
        return p;
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint: malformed '") + name + "' network: " + e.what());
    } catch (const Error& e) {
        throw Error(std::string("checkpoint: invalid '") + name + "' network: " + e.what());
    }
}

}  // namespace

std::string checkpoint_to_string(const SdeModel& model, const CheckpointInfo& info) {
    model.validate();
    json j;
    j["format"] = "nsde-checkpoint";
    j["version"] = kCheckpointVersion;
    j["hyperparameters"] = {{"delta", model.delta},
                            {"alpha_mode", to_string(model.guidance.mode)},
                            {"alpha", model.guidance.alpha},
                            {"sigma2_min", model.sigma2_min()},
                            {"time_scale", model.time_scale},
                            {"history", model.history()}};
    j["flow"] = net_to_json(model.flow);
    j["diffusion"] = net_to_json(model.diffusion);
    if (model.denoiser) j["denoiser"] = net_to_json(*model.denoiser);
    if (info.dt || info.n_steps || !info.x0.empty()) {
        json d = json::object();
        if (info.dt) d["dt"] = *info.dt;
        if (info.n_steps) d["n_steps"] = *info.n_steps;
        if (!info.x0.empty()) d["x0"] = info.x0;
        j["data"] = d;
    }
    if (!info.provenance.empty()) j["provenance"] = info.provenance;
    return j.dump(1) + "\n";
}

SdeModel checkpoint_from_string(const std::string& text, CheckpointInfo* info) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint: not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", std::string()) != "nsde-checkpoint") {
        throw Error("checkpoint: missing format tag");
    }
    if (j.value("version", 0) != kCheckpointVersion) {
        throw Error("checkpoint: unsupported version " + j.value("version", json()).dump());
    }
    SdeModel m;
    try {
        const json& h = j.at("hyperparameters");
        m.delta = h.at("delta").get<double>();
        m.guidance.mode = parse_alpha_mode(h.at("alpha_mode").get<std::string>());
        m.guidance.alpha = h.at("alpha").get<double>();
        m.time_scale = h.at("time_scale").get<double>();
        m.flow = net_from_json(j.at("flow"), "flow");
        m.diffusion = net_from_json(j.at("diffusion"), "diffusion");
        if (j.contains("denoiser")) m.denoiser = net_from_json(j.at("denoiser"), "denoiser");
        if (info) {
            *info = CheckpointInfo{};
            if (j.contains("data")) {
                const json& d = j.at("data");
                if (d.contains("dt")) info->dt = d.at("dt").get<double>();
                if (d.contains("n_steps")) info->n_steps = d.at("n_steps").get<std::size_t>();
                if (d.contains("x0")) info->x0 = d.at("x0").get<std::vector<double>>();
            }
            if (j.contains("provenance")) {
                info->provenance = j.at("provenance").get<std::map<std::string, std::string>>();
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint: ") + e.what());
    }
    m.validate();
    return m;
}

void save_checkpoint(const SdeModel& model, const std::filesystem::path& path, const CheckpointInfo& info) {
    const std::string text = checkpoint_to_string(model, info);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write checkpoint '" + path.string() + "'");
    os << text;
    if (!os) throw Error("failed writing checkpoint '" + path.string() + "'");
}

SdeModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return checkpoint_from_string(ss.str(), info);
}

}  // namespace nsde
