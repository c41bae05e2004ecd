#include "iled/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "iled/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace iled::data {

double Trajectory::dt() const {
    if (t.size() < 2) throw DataError("Trajectory::dt: fewer than two samples");
    return t[1] - t[0];
}

namespace {

void write_f64(const std::string& path, const diff::Tensor& states) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    os.write(reinterpret_cast<const char*>(states.data.data()), static_cast<std::streamsize>(states.data.size() * 8));
    if (!os) throw DataError("write failed: " + path);
}

diff::Tensor read_f64(const std::string& path, std::int64_t d_phi) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw DataError("cannot open: " + path);
    const std::streamsize bytes = is.tellg();
    if (bytes % (8 * d_phi) != 0) throw DataError("file size of " + path + " is not a multiple of the state size");
    const std::int64_t T = bytes / (8 * d_phi);
    is.seekg(0);
    diff::Tensor t({T, d_phi});
    is.read(reinterpret_cast<char*>(t.data.data()), bytes);
    if (!is) throw DataError("read failed: " + path);
    return t;
}

json meta_to_json(const DatasetMeta& m) {
    json norm = json::array();
    for (const auto& c : m.normalization) norm.push_back({{"scale", c.scale}, {"offset", c.offset}});
    return json{{"format_version", m.format_version},
                {"system", m.system},
                {"sample_dt", m.sample_dt},
                {"channels", m.channels},
                {"grid", m.grid},
                {"seed", m.seed},
                {"normalization", norm},
                {"train_files", m.train_files},
                {"val_files", m.val_files},
                {"test_files", m.test_files},
                {"config", json::parse(m.config_json.empty() ? "{}" : m.config_json)}};
}

DatasetMeta meta_from_json(const json& j) {
    DatasetMeta m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1) throw DataError("dataset: unsupported format_version");
    m.system = j.at("system").get<std::string>();
    m.sample_dt = j.at("sample_dt").get<double>();
    m.channels = j.at("channels").get<int>();
    m.grid = j.at("grid").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("normalization")) m.normalization.push_back({c.at("scale"), c.at("offset")});
    m.train_files = j.at("train_files").get<std::vector<std::string>>();
    m.val_files = j.at("val_files").get<std::vector<std::string>>();
    m.test_files = j.at("test_files").get<std::vector<std::string>>();
    m.config_json = j.at("config").dump();
    return m;
}

std::vector<Trajectory> load_split(const fs::path& dir, const std::vector<std::string>& files,
                                   const DatasetMeta& meta) {
    std::vector<Trajectory> out;
    for (const auto& f : files) {
        Trajectory tr;
        tr.states = read_f64((dir / f).string(), meta.d_phi());
        tr.t.resize(static_cast<std::size_t>(tr.states.shape[0]));
        for (std::size_t i = 0; i < tr.t.size(); ++i) tr.t[i] = meta.sample_dt * static_cast<double>(i);
        out.push_back(std::move(tr));
    }
    return out;
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& ds, bool force) {
    fs::path p(dir);
    if (fs::exists(p / "meta.json") && !force)
        throw ConfigError("dataset directory already contains meta.json (use --force to overwrite): " + dir);
    fs::create_directories(p);

    auto dump_split = [&](const std::vector<Trajectory>& split, const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < split.size(); ++i) write_f64((p / names[i]).string(), split[i].states);
    };
    dump_split(ds.train, ds.meta.train_files);
    dump_split(ds.val, ds.meta.val_files);
    dump_split(ds.test, ds.meta.test_files);

    std::ofstream os(p / "meta.json", std::ios::trunc);
    if (!os) throw DataError("cannot write meta.json in " + dir);
    os << meta_to_json(ds.meta).dump(2) << "\n";
}

DatasetMeta load_dataset_meta(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "meta.json");
    if (!is) throw DataError("dataset: missing meta.json in " + dir);
    json j;
    try {
        is >> j;
        return meta_from_json(j);
    } catch (const json::exception& e) {
        throw DataError("dataset: malformed meta.json in " + dir + ": " + e.what());
    }
}

Dataset load_dataset(const std::string& dir) {
    Dataset ds;
    ds.meta = load_dataset_meta(dir);
    fs::path p(dir);
    ds.train = load_split(p, ds.meta.train_files, ds.meta);
    ds.val = load_split(p, ds.meta.val_files, ds.meta);
    ds.test = load_split(p, ds.meta.test_files, ds.meta);
    return ds;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "t";
    for (std::int64_t j = 0; j < traj.d_phi(); ++j) os << ",phi_" << j;
    os << "\n";
    os.precision(17);
    for (std::int64_t i = 0; i < traj.samples(); ++i) {
        os << traj.t[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < traj.d_phi(); ++j) os << "," << traj.states.at(i, j);
        os << "\n";
    }
}

void normalize_inplace(Trajectory& traj, const DatasetMeta& meta) {
    if (meta.normalization.empty()) return;
    if (static_cast<int>(meta.normalization.size()) != meta.channels)
        throw DataError("normalization entries must match channel count");
    for (std::int64_t i = 0; i < traj.samples(); ++i)
        for (int c = 0; c < meta.channels; ++c) {
            const auto& a = meta.normalization[static_cast<std::size_t>(c)];
            for (int g = 0; g < meta.grid; ++g) {
                double& v = traj.states.at(i, static_cast<std::int64_t>(c) * meta.grid + g);
                v = a.scale * v + a.offset;
            }
        }
}

void denormalize_inplace(Trajectory& traj, const DatasetMeta& meta) {
    if (meta.normalization.empty()) return;
    for (std::int64_t i = 0; i < traj.samples(); ++i)
        for (int c = 0; c < meta.channels; ++c) {
            const auto& a = meta.normalization[static_cast<std::size_t>(c)];
            for (int g = 0; g < meta.grid; ++g) {
                double& v = traj.states.at(i, static_cast<std::int64_t>(c) * meta.grid + g);
                v = (v - a.offset) / a.scale;
            }
        }
}

}  // namespace iled::data
