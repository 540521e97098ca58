// SPDX-License-Identifier: Apache-2.0
#include "lumen/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lumen::inline LUMEN_ABI {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
}

json camera_to_json(const std::string& name, const Camera& c) {
    json j;
    j["name"] = name;
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["width"] = c.width;
    j["height"] = c.height;
    json r = json::array();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r.push_back(c.rotation(i, k));
    j["rotation"] = r;
    j["translation"] = {c.translation.x(), c.translation.y(), c.translation.z()};
    return j;
}

Camera camera_from_json(const json& j) {
    Camera c;
    c.fx = j.at("fx").get<Real>();
    c.fy = j.at("fy").get<Real>();
    c.cx = j.at("cx").get<Real>();
    c.cy = j.at("cy").get<Real>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    const auto& r = j.at("rotation");
    if (r.size() != 9) throw DatasetError("camera rotation must have 9 entries");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) c.rotation(i, k) = r.at(static_cast<std::size_t>(3 * i + k)).get<Real>();
    const auto& t = j.at("translation");
    if (t.size() != 3) throw DatasetError("camera translation must have 3 entries");
    for (int i = 0; i < 3; ++i) c.translation[i] = t.at(static_cast<std::size_t>(i)).get<Real>();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw DatasetError(e.what());
    }
    return c;
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw DatasetError("expected a 3-vector");
    return Vec3(j[0].get<Real>(), j[1].get<Real>(), j[2].get<Real>());
}

}  // namespace

std::vector<std::size_t> Dataset::train_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (!frames[i].test) out.push_back(i);
    return out;
}

std::vector<std::size_t> Dataset::test_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (frames[i].test) out.push_back(i);
    return out;
}

void Dataset::validate() const {
    if (frames.empty()) throw DatasetError("dataset has no frames");
    const int w = frames.front().camera.width, h = frames.front().camera.height;
    for (const auto& f : frames) {
        if (f.camera.width != w || f.camera.height != h)
            throw DatasetError("frame " + f.name + ": inconsistent resolution");
        if (f.rgb.width != w || f.rgb.height != h || f.rgb.channels != 3)
            throw DatasetError("frame " + f.name + ": image does not match camera");
        if (f.depth && (f.depth->width != w || f.depth->height != h || f.depth->channels != 1))
            throw DatasetError("frame " + f.name + ": depth does not match camera");
    }
    if (points.positions.size() != points.normals.size()) throw DatasetError("point cloud normals missing");
}

std::string poses_to_json(const std::vector<std::pair<std::string, Camera>>& poses) {
    json frames = json::array();
    for (const auto& [name, cam] : poses) frames.push_back(camera_to_json(name, cam));
    json root;
    root["frames"] = frames;
    return root.dump(1) + "\n";
}

std::vector<std::pair<std::string, Camera>> load_poses(const std::filesystem::path& path) {
    const json root = parse_json(path);
    std::vector<std::pair<std::string, Camera>> out;
    try {
        for (const auto& f : root.at("frames")) out.emplace_back(f.at("name").get<std::string>(), camera_from_json(f));
    } catch (const json::exception& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
    return out;
}

std::string light_to_json(const LightRig& l) {
    json j;
    j["offset"] = vec_json(l.offset);
    j["intensity"] = vec_json(l.intensity);
    j["atten_coeffs"] = vec_json(l.atten_coeffs);
    j["spot_inner"] = l.spot_inner;
    j["spot_outer"] = l.spot_outer;
    return j.dump(1) + "\n";
}

LightRig light_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        LightRig l;
        l.offset = vec_from(j.at("offset"));
        l.intensity = vec_from(j.at("intensity"));
        l.atten_coeffs = vec_from(j.at("atten_coeffs"));
        l.spot_inner = j.at("spot_inner").get<Real>();
        l.spot_outer = j.at("spot_outer").get<Real>();
        l.validate();
        return l;
    } catch (const json::exception& e) {
        throw DatasetError(std::string("light: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DatasetError(e.what());
    }
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir, bool raw) {
    ds.validate();
    std::vector<std::pair<std::string, Camera>> poses;
    json split;
    split["train"] = json::array();
    split["test"] = json::array();
    for (const auto& f : ds.frames) {
        write_png8(dir / "images" / (f.name + ".png"), f.rgb);
        if (raw) write_raw(dir / "images" / (f.name + ".raw"), f.rgb);
        if (f.depth) {
            write_png16(dir / "depth" / (f.name + ".png"), *f.depth, kDepthScaleMm);
            write_text_atomic(dir / "depth" / (f.name + ".json"), json{{"scale_mm", kDepthScaleMm}}.dump() + "\n");
        }
        poses.emplace_back(f.name, f.camera);
        split[f.test ? "test" : "train"].push_back(f.name);
    }
    write_text_atomic(dir / "poses.json", poses_to_json(poses));
    write_text_atomic(dir / "split.json", split.dump(1) + "\n");
    if (!ds.points.positions.empty()) {
        std::string text;
        char line[256];
        for (std::size_t i = 0; i < ds.points.positions.size(); ++i) {
            const Vec3& p = ds.points.positions[i];
            const Vec3& n = ds.points.normals[i];
            std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", static_cast<double>(p.x()),
                          static_cast<double>(p.y()), static_cast<double>(p.z()), static_cast<double>(n.x()),
                          static_cast<double>(n.y()), static_cast<double>(n.z()));
            text += line;
        }
        write_text_atomic(dir / "points.csv", text);
    }
    if (ds.light) write_text_atomic(dir / "light.json", light_to_json(*ds.light));
}

Dataset load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
    Dataset ds;
    const auto poses = load_poses(dir / "poses.json");
    std::set<std::string> test_names;
    if (std::filesystem::exists(dir / "split.json")) {
        const json split = parse_json(dir / "split.json");
        if (split.contains("test"))
            for (const auto& n : split.at("test")) test_names.insert(n.get<std::string>());
    }
    try {
        for (const auto& [name, cam] : poses) {
            Frame f;
            f.name = name;
            f.camera = cam;
            f.test = test_names.count(name) > 0;
            const auto raw_path = dir / "images" / (name + ".raw");
            f.rgb = std::filesystem::exists(raw_path) ? read_raw(raw_path) : read_png8(dir / "images" / (name + ".png"));
            if (f.rgb.channels == 1) {
                Image rgb(f.rgb.width, f.rgb.height, 3);
                for (std::size_t i = 0; i < f.rgb.pixel_count(); ++i)
                    for (int c = 0; c < 3; ++c) rgb.data[3 * i + c] = f.rgb.data[i];
                f.rgb = std::move(rgb);
            }
            const auto depth_png = dir / "depth" / (name + ".png");
            if (std::filesystem::exists(depth_png)) {
                const json side = parse_json(dir / "depth" / (name + ".json"));
                f.depth = read_png16(depth_png, side.at("scale_mm").get<double>());
            }
            ds.frames.push_back(std::move(f));
        }
    } catch (const ImageIoError& e) {
        throw DatasetError(e.what());
    } catch (const json::exception& e) {
        throw DatasetError(e.what());
    }
    const auto points_path = dir / "points.csv";
    if (std::filesystem::exists(points_path)) {
        std::istringstream in(read_text(points_path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            double v[6];
            if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3], &v[4], &v[5]) != 6)
                throw DatasetError("points.csv: malformed line '" + line + "'");
            ds.points.positions.emplace_back(Real(v[0]), Real(v[1]), Real(v[2]));
            ds.points.normals.emplace_back(Real(v[3]), Real(v[4]), Real(v[5]));
        }
    }
    if (std::filesystem::exists(dir / "light.json")) ds.light = light_from_json(read_text(dir / "light.json"));
    ds.validate();
    return ds;
}

}  // namespace lumen::inline LUMEN_ABI
