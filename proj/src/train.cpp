#include "zsl/train.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "zsl/io.hpp"

namespace zsl {

LossMode parse_loss_mode(std::string_view name) {
    if (name == "regression") return LossMode::regression;
    if (name == "softmax") return LossMode::softmax;
    throw std::invalid_argument("unknown loss mode '" + std::string(name) +
                                "' (expected regression|softmax)");
}

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const GcnModel<T>& model, std::size_t epoch,
                     std::uint64_t seed, const AdamState<T>* opt) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["layer_dims"] = model.layer_dims;
    manifest["slope"] = static_cast<double>(model.slope);
    manifest["normalize_output"] = model.normalize_output;
    manifest["seed"] = seed;
    manifest["epoch"] = epoch;
    std::vector<std::string> weight_files;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const std::string name = "weight_" + std::to_string(l) + ".zslm";
        save_matrix(dir / name, model.weights[l]);
        weight_files.push_back(name);
    }
    manifest["weights"] = weight_files;
    if (opt) {
        nlohmann::json adam;
        adam["t"] = opt->t;
        std::vector<std::string> m_files, v_files;
        for (std::size_t l = 0; l < opt->m.size(); ++l) {
            const std::string mn = "adam_m_" + std::to_string(l) + ".zslm";
            const std::string vn = "adam_v_" + std::to_string(l) + ".zslm";
            save_matrix(dir / mn, opt->m[l]);
            save_matrix(dir / vn, opt->v[l]);
            m_files.push_back(mn);
            v_files.push_back(vn);
        }
        adam["m"] = m_files;
        adam["v"] = v_files;
        manifest["adam"] = adam;
    }
    atomic_write(dir / "checkpoint.json", manifest.dump(2) + "\n");
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& dir) {
    Checkpoint<T> ckpt;
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(dir / "checkpoint.json"));
        ckpt.model.layer_dims = manifest.at("layer_dims").get<std::vector<std::size_t>>();
        ckpt.model.slope = static_cast<T>(manifest.at("slope").get<double>());
        ckpt.model.normalize_output = manifest.at("normalize_output").get<bool>();
        ckpt.seed = manifest.at("seed").get<std::uint64_t>();
        ckpt.epoch = manifest.at("epoch").get<std::size_t>();
        for (const auto& name : manifest.at("weights").get<std::vector<std::string>>())
            ckpt.model.weights.push_back(load_matrix<T>(dir / name));
        if (manifest.contains("adam")) {
            AdamState<T> opt;
            opt.t = manifest["adam"].at("t").get<std::uint64_t>();
            for (const auto& name : manifest["adam"].at("m").get<std::vector<std::string>>())
                opt.m.push_back(load_matrix<T>(dir / name));
            for (const auto& name : manifest["adam"].at("v").get<std::vector<std::string>>())
                opt.v.push_back(load_matrix<T>(dir / name));
            ckpt.opt = std::move(opt);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError((dir / "checkpoint.json").string() + ": bad checkpoint manifest: " +
                          e.what());
    }
    if (ckpt.model.weights.size() + 1 != ckpt.model.layer_dims.size())
        throw FormatError(dir.string() + ": checkpoint weight count does not match layer_dims");
    for (std::size_t l = 0; l < ckpt.model.weights.size(); ++l)
        if (ckpt.model.weights[l].rows != ckpt.model.layer_dims[l] ||
            ckpt.model.weights[l].cols != ckpt.model.layer_dims[l + 1])
            throw FormatError(dir.string() + ": checkpoint weight " + std::to_string(l) +
                              " has the wrong shape");
    return ckpt;
}

template void save_checkpoint<float>(const std::filesystem::path&, const GcnModel<float>&,
                                     std::size_t, std::uint64_t, const AdamState<float>*);
template void save_checkpoint<double>(const std::filesystem::path&, const GcnModel<double>&,
                                      std::size_t, std::uint64_t, const AdamState<double>*);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

void save_loss_history(const std::filesystem::path& path, const std::vector<float>& history,
                       std::size_t start_epoch) {
    std::string csv = "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < history.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", start_epoch + i + 1,
                      static_cast<double>(history[i]));
        csv += buf;
    }
    atomic_write(path, csv);
}

} // namespace zsl
