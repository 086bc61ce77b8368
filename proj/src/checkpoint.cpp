#include "leo/checkpoint.hpp"

#include <fstream>

namespace leo {

namespace fs = std::filesystem;
using nlohmann::json;

void save_params(const fs::path& dir, const ParamStore& ps, const json& extra) {
    fs::create_directories(dir);
    json manifest = extra;
    manifest["format"] = "leo-checkpoint-v1";
    json plist = json::array();
    for (const auto& p : ps.items) {
        std::string file = p.name + ".bin";
        plist.push_back({{"name", p.name}, {"shape", p.value.shape}, {"file", file}});
        std::ofstream out(dir / file, std::ios::binary);
        out.write(reinterpret_cast<const char*>(p.value.ptr()),
                  static_cast<std::streamsize>(p.value.numel() * sizeof(float)));
        if (!out) throw IoError("failed to write " + (dir / file).string());
    }
    manifest["params"] = plist;
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("failed to write manifest in " + dir.string());
}

json load_manifest(const fs::path& dir) {
    fs::path mf = dir / "manifest.json";
    if (!fs::exists(mf)) throw IoError("no manifest.json in " + dir.string());
    json manifest;
    std::ifstream in(mf);
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError("corrupt manifest in " + dir.string() + ": " + e.what());
    }
    return manifest;
}

json load_params(const fs::path& dir, ParamStore& ps) {
    json manifest = load_manifest(dir);
    size_t loaded = 0;
    for (const auto& entry : manifest.at("params")) {
        std::string name = entry.at("name").get<std::string>();
        ParamT<float>* p = ps.find(name);
        if (!p) throw IoError("checkpoint has unknown param " + name + " in " + dir.string());
        std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (shape != p->value.shape)
            throw IoError("shape mismatch for " + name + ": checkpoint " + shape_str(shape) +
                          " vs model " + shape_str(p->value.shape));
        fs::path file = dir / entry.at("file").get<std::string>();
        std::ifstream in(file, std::ios::binary);
        if (!in) throw IoError("missing blob " + file.string());
        in.read(reinterpret_cast<char*>(p->value.ptr()),
                static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(p->value.numel() * sizeof(float)))
            throw IoError("truncated blob " + file.string());
        ++loaded;
    }
    if (loaded != ps.items.size())
        throw IoError("checkpoint in " + dir.string() + " misses parameters (" +
                      std::to_string(loaded) + "/" + std::to_string(ps.items.size()) + ")");
    return manifest;
}

std::string config_hash(const json& j) {
    std::string s = j.dump();
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace leo
