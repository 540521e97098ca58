// SPDX-License-Identifier: Apache-2.0
#include "lumen/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lumen/config_file.hpp"
#include "lumen/dataset.hpp"
#include "lumen/image.hpp"
#include "lumen/losses.hpp"
#include "lumen/optimize.hpp"
#include "lumen/relight.hpp"
#include "lumen/scene_io.hpp"
#include "lumen/service.hpp"
#include "lumen/synthgen.hpp"

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

Vec3 to_vec3(const std::vector<double>& v) { return Vec3(Real(v[0]), Real(v[1]), Real(v[2])); }

Vec3 json_vec3(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw DeformError(std::string(what) + ": expected 3 numbers");
    return Vec3(j[0].get<Real>(), j[1].get<Real>(), j[2].get<Real>());
}

RigidTransform rigid_from_json(const json& j) {
    RigidTransform t;
    if (j.contains("rotation") && j.contains("axis_angle_deg"))
        throw DeformError("rigid: give either rotation or axis_angle_deg");
    if (j.contains("rotation")) {
        const auto& r = j.at("rotation");
        if (!r.is_array() || r.size() != 9) throw DeformError("rigid: rotation needs 9 numbers");
        for (int i = 0; i < 9; ++i) t.rotation(i / 3, i % 3) = r[static_cast<std::size_t>(i)].get<Real>();
        const Real err = (t.rotation.transpose() * t.rotation - Mat3::Identity()).norm();
        if (!(err < Real(1e-4)) || !(t.rotation.determinant() > 0)) throw DeformError("rigid: rotation is not a rotation");
    }
    if (j.contains("axis_angle_deg")) {
        const auto& a = j.at("axis_angle_deg");
        if (!a.is_array() || a.size() != 4) throw DeformError("rigid: axis_angle_deg needs [x, y, z, degrees]");
        Eigen::Matrix<double, 3, 1> axis(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
        if (!(axis.norm() > 0)) throw DeformError("rigid: rotation axis is zero");
        const double angle = a[3].get<double>() * kPi / 180;
        t.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix().cast<Real>();
    }
    if (j.contains("translation")) t.translation = json_vec3(j.at("translation"), "rigid: translation");
    return t;
}

std::array<int, 3> cells_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw DeformError("cage: cells needs 3 integers");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

struct PoseChoice {
    std::string name;
    Camera camera;
};

std::vector<std::pair<std::string, Camera>> poses_from(const std::filesystem::path& path) {
    auto poses = load_poses(path);
    if (poses.empty()) throw DatasetError(path.string() + ": no poses");
    return poses;
}

PoseChoice pick_pose(const std::filesystem::path& path, const std::string& frame) {
    const auto poses = poses_from(path);
    if (frame.empty()) return {poses.front().first, poses.front().second};
    for (const auto& [name, cam] : poses)
        if (name == frame) return {name, cam};
    if (!frame.empty() && std::all_of(frame.begin(), frame.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        const std::size_t idx = std::stoul(frame);
        if (idx < poses.size()) return {poses[idx].first, poses[idx].second};
    }
    throw DatasetError("no pose named '" + frame + "' in " + path.string());
}

Image buffer_raw(const RenderOutput& out, const std::string& name) {
    const auto& buf = out.buffer(name);
    const int channels = static_cast<int>(buf.size() / out.pixel_count());
    Image img(out.width, out.height, channels);
    std::copy(buf.begin(), buf.end(), img.data.begin());
    return img;
}

void write_buffer(const RenderOutput& out, const std::string& name, const std::filesystem::path& png, bool raw) {
    write_png8(png, buffer_image(out, name));
    if (raw) {
        std::filesystem::path r = png;
        r.replace_extension(".raw");
        write_raw(r, buffer_raw(out, name));
    }
}

bool is_decomposition(const std::string& buffer) {
    return buffer == "albedo" || buffer == "diffuse" || buffer == "specular";
}

void check_buffer(const std::string& buffer) {
    const auto& names = buffer_names();
    if (std::find(names.begin(), names.end(), buffer) == names.end())
        throw ConfigError("unknown buffer '" + buffer + "'");
}

std::shared_ptr<const SceneModel> load_shared(const std::filesystem::path& path) {
    return std::make_shared<const SceneModel>(load_scene(path));
}

struct GenArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> points;
    bool raw = false;
    int threads = 0;
};

struct TrainArgs {
    std::string config, data, out, log, init, checkpoint_dir;
    std::optional<int> iterations;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool quiet = false;
};

struct RenderArgs {
    std::string scene, poses, out, buffer = "rgb";
    bool raw = false, no_mlp = false;
    int threads = 0;
};

struct RelightArgs {
    std::string scene, poses, frame, out, buffer = "rgb";
    std::vector<double> light_offset, light_dir, albedo_tint;
    std::optional<double> intensity_scale, spot_inner, spot_outer, atten_scale, roughness_scale;
    bool raw = false;
    int threads = 0;
};

struct DecomposeArgs {
    std::string scene, poses, frame, out;
    bool raw = false;
    int threads = 0;
};

struct EvalArgs {
    std::string scene, data, split = "test", out;
    int threads = 0;
};

struct DeformArgs {
    std::string scene, cage, out;
};

struct ServeArgs {
    std::string scene, bind = "127.0.0.1:8080";
    int max_size = 512;
    std::size_t queue_depth = 8;
    int threads = 0;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
    GenConfig g;
    if (!a.config.empty()) {
        const ConfigFile file = ConfigFile::load(a.config);
        file.reject_sections({"gen", "tube", "train"});
        g = gen_config_from(file);
    }
    if (a.seed) g.seed = *a.seed;
    if (a.points) g.points = *a.points;
    RaytraceOptions ro;
    ro.threads = a.threads;
    const Dataset ds = make_tube_dataset(g.tube, g.points, g.seed, ro);
    write_dataset(ds, a.out, a.raw);
    out << "wrote " << ds.frames.size() << " frames (" << ds.test_indices().size() << " held out) and "
        << ds.points.positions.size() << " points to " << a.out << "\n";
    return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    TrainConfig cfg;
    if (!a.config.empty()) {
        const ConfigFile file = ConfigFile::load(a.config);
        file.reject_sections({"gen", "tube", "train"});
        apply_train_config(file, cfg);
    }
    if (a.iterations) cfg.iterations = *a.iterations;
    if (a.seed) cfg.seed = *a.seed;
    if (a.threads) cfg.threads = a.threads;
    if (!a.checkpoint_dir.empty()) cfg.checkpoint_dir = a.checkpoint_dir;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const Dataset ds = load_dataset(a.data);
    SceneModel scene;
    if (!a.init.empty()) {
        scene = load_scene(a.init);
    } else {
        if (ds.points.positions.empty()) throw DatasetError(a.data + ": no points.csv to initialize from");
        scene = initialize_scene(ds.points, ds.light.value_or(LightRig{}), cfg.use_hash, cfg.seed);
    }
    ProgressFn progress;
    if (!a.quiet) progress = [&err](const LogRow& r) { err << log_csv_row(r); };
    const TrainResult result = train(std::move(scene), ds, cfg, progress);
    save_scene(result.scene, a.out);
    std::filesystem::path log = a.log;
    if (log.empty()) log = std::filesystem::path(a.out).parent_path() / "train_log.csv";
    write_text_atomic(log, log_to_csv(result.log));
    const LogRow& last = result.log.back();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "trained %d iterations: loss %.6g, held-out PSNR %.3f dB, %zu splats\n",
                  last.iteration, static_cast<double>(last.total), static_cast<double>(last.test_psnr), last.splats);
    out << buf;
    return kExitOk;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
    check_buffer(a.buffer);
    const SceneModel scene = load_scene(a.scene);
    const auto poses = poses_from(a.poses);
    RenderOptions opt;
    opt.raster.threads = a.threads;
    opt.use_mlp = !a.no_mlp;
    opt.decomposition = is_decomposition(a.buffer);
    for (const auto& [name, cam] : poses) {
        const RenderOutput r = render_view(scene, cam, opt);
        write_buffer(r, a.buffer, std::filesystem::path(a.out) / (name + ".png"), a.raw);
    }
    out << "rendered " << poses.size() << " views to " << a.out << "\n";
    return kExitOk;
}

int cmd_relight(const RelightArgs& a, std::ostream& out) {
    check_buffer(a.buffer);
    auto scene = load_shared(a.scene);
    const PoseChoice pose = pick_pose(a.poses, a.frame);
    RelightOverrides o;
    if (!a.light_offset.empty()) o.light_offset = to_vec3(a.light_offset);
    if (!a.light_dir.empty()) o.light_direction = to_vec3(a.light_dir);
    if (!a.albedo_tint.empty()) o.albedo_tint = to_vec3(a.albedo_tint);
    if (a.intensity_scale) o.intensity_scale = Real(*a.intensity_scale);
    if (a.spot_inner) o.spot_inner = Real(*a.spot_inner);
    if (a.spot_outer) o.spot_outer = Real(*a.spot_outer);
    if (a.atten_scale) o.atten_scale = Real(*a.atten_scale);
    if (a.roughness_scale) o.roughness_scale = Real(*a.roughness_scale);
    RenderOptions opt;
    opt.raster.threads = a.threads;
    opt.decomposition = is_decomposition(a.buffer);
    const RelightSetup setup = apply_overrides(std::move(scene), o, opt);
    const RenderOutput r = render_relit(setup, pose.camera);
    write_buffer(r, a.buffer, a.out, a.raw);
    out << "relit view " << pose.name << " written to " << a.out << "\n";
    return kExitOk;
}

int cmd_decompose(const DecomposeArgs& a, std::ostream& out) {
    const SceneModel scene = load_scene(a.scene);
    const PoseChoice pose = pick_pose(a.poses, a.frame);
    RenderOptions opt;
    opt.raster.threads = a.threads;
    opt.decomposition = true;
    const RenderOutput r = render_view(scene, pose.camera, opt);
    const std::filesystem::path dir = a.out;
    for (const auto& name : buffer_names()) write_buffer(r, name, dir / (name + ".png"), a.raw);
    out << "decomposed view " << pose.name << " into " << a.out << "\n";
    return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.split != "test" && a.split != "train" && a.split != "all")
        throw ConfigError("--split must be test, train or all");
    const SceneModel scene = load_scene(a.scene);
    const Dataset ds = load_dataset(a.data);
    std::vector<std::size_t> idx;
    if (a.split == "test") idx = ds.test_indices();
    else if (a.split == "train") idx = ds.train_indices();
    else
        for (std::size_t i = 0; i < ds.frames.size(); ++i) idx.push_back(i);
    if (idx.empty()) throw DatasetError("no frames in the " + a.split + " split");
    RenderOptions opt;
    opt.raster.threads = a.threads;
    std::string csv = "frame,psnr,ssim\n";
    double sp = 0, ss = 0;
    char line[128];
    for (std::size_t i : idx) {
        const Frame& f = ds.frames[i];
        const RenderOutput r = render_view(scene, f.camera, opt);
        const double p = psnr(r.rgb, f.rgb.data);
        const double s = ssim(r.rgb, f.rgb.data, r.width, r.height, 3);
        sp += p;
        ss += s;
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f\n", f.name.c_str(), p, s);
        csv += line;
    }
    std::snprintf(line, sizeof(line), "mean,%.6f,%.6f\n", sp / double(idx.size()), ss / double(idx.size()));
    csv += line;
    if (a.out.empty()) out << csv;
    else {
        write_text_atomic(a.out, csv);
        out << line;
    }
    return kExitOk;
}

int cmd_deform(const DeformArgs& a, std::ostream& out) {
    const SceneModel scene = load_scene(a.scene);
    const Deformation d = deformation_from_json(read_text(a.cage));
    const SceneModel moved = deform_splats(scene, d);
    save_scene(moved, a.out);
    out << "deformed " << moved.splats.size() << " splats into " << a.out << "\n";
    return kExitOk;
}

int cmd_serve(const ServeArgs& a, std::ostream& out) {
    const auto colon = a.bind.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--bind must be host:port");
    const std::string host = a.bind.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(a.bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("--bind: invalid port");
    }
    if (port < 0 || port > 65535) throw ConfigError("--bind: invalid port");
    ServiceOptions so;
    so.max_width = so.max_height = a.max_size;
    so.queue_depth = a.queue_depth;
    so.render_threads = a.threads;
    RelightService service(load_shared(a.scene), so);
    const int bound = service.start(host, port);
    out << "serving on http://" << host << ":" << bound << "\n" << std::flush;
    service.wait();
    service.stop();
    return kExitOk;
}

}  // namespace

Deformation deformation_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        const std::string type = j.at("type").get<std::string>();
        if (type == "rigid") return rigid_from_json(j);
        if (type == "field") {
            RigidField f;
            for (const auto& t : j.at("transforms")) f.transforms.push_back(rigid_from_json(t));
            return f;
        }
        if (type == "cage") {
            const Vec3 lo = json_vec3(j.at("min"), "cage: min"), hi = json_vec3(j.at("max"), "cage: max");
            Cage cage = Cage::identity(lo, hi, cells_from(j.at("cells")));
            if (j.contains("points")) {
                cage.points.clear();
                for (const auto& p : j.at("points")) cage.points.push_back(json_vec3(p, "cage: points"));
            }
            if (j.contains("displacements")) {
                for (const auto& d : j.at("displacements")) {
                    const auto idx = cells_from(d.at("index"));
                    for (int a = 0; a < 3; ++a)
                        if (idx[a] < 0 || idx[a] > cage.cells[a]) throw DeformError("cage: displacement index out of range");
                    cage.points.at(cage.index(idx[0], idx[1], idx[2])) += json_vec3(d.at("offset"), "cage: offset");
                }
            }
            cage.validate();
            return cage;
        }
        throw DeformError("unknown deformation type '" + type + "'");
    } catch (const json::exception& e) {
        throw DeformError(std::string("deformation: ") + e.what());
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Relightable Gaussian splatting for endoscopic scenes.", "lumensplat"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "lumensplat 0.1.0");

    GenArgs gen_a;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic tube dataset with ray-traced frames");
    gen->add_option("--config", gen_a.config, "Config file with [gen] and [tube] sections")->check(CLI::ExistingFile);
    gen->add_option("--out", gen_a.out, "Output dataset directory")->required();
    gen->add_option("--seed", gen_a.seed, "Random seed (overrides gen.seed)");
    gen->add_option("--points", gen_a.points, "Surface sample count (overrides gen.points)")
        ->check(CLI::PositiveNumber);
    gen->add_flag("--raw", gen_a.raw, "Also write linear float images");
    gen->add_option("--threads", gen_a.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

    TrainArgs train_a;
    auto* tr = app.add_subcommand("train", "Fit a scene to a dataset");
    tr->add_option("--config", train_a.config, "Config file with a [train] section")->check(CLI::ExistingFile);
    tr->add_option("--data", train_a.data, "Dataset directory")->required();
    tr->add_option("--out", train_a.out, "Output scene file")->required();
    tr->add_option("--log", train_a.log, "Training log CSV (default: train_log.csv next to --out)");
    tr->add_option("--init", train_a.init, "Start from this scene instead of the point cloud")
        ->check(CLI::ExistingFile);
    tr->add_option("--iterations", train_a.iterations, "Iteration count (overrides train.iterations)")
        ->check(CLI::PositiveNumber);
    tr->add_option("--seed", train_a.seed, "Random seed (overrides train.seed)");
    tr->add_option("--checkpoint-dir", train_a.checkpoint_dir, "Directory for periodic checkpoints");
    tr->add_option("--threads", train_a.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    tr->add_flag("--quiet", train_a.quiet, "Do not print log rows");

    RenderArgs render_a;
    auto* rd = app.add_subcommand("render", "Render a scene along a pose file");
    rd->add_option("--scene", render_a.scene, "Scene file")->required()->check(CLI::ExistingFile);
    rd->add_option("--poses", render_a.poses, "poses.json")->required()->check(CLI::ExistingFile);
    rd->add_option("--out", render_a.out, "Output directory")->required();
    rd->add_option("--buffer", render_a.buffer, "rgb, albedo, diffuse, specular, normal or depth");
    rd->add_flag("--raw", render_a.raw, "Also write linear float buffers");
    rd->add_flag("--no-mlp", render_a.no_mlp, "Use the classic Lambertian diffuse term");
    rd->add_option("--threads", render_a.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

    RelightArgs relight_a;
    auto* rl = app.add_subcommand("relight", "Render one view with light and material overrides");
    rl->add_option("--scene", relight_a.scene, "Scene file")->required()->check(CLI::ExistingFile);
    rl->add_option("--poses", relight_a.poses, "poses.json")->required()->check(CLI::ExistingFile);
    rl->add_option("--frame", relight_a.frame, "Pose name or index (default: first)");
    rl->add_option("--out", relight_a.out, "Output PNG")->required();
    rl->add_option("--buffer", relight_a.buffer, "rgb, albedo, diffuse, specular, normal or depth");
    rl->add_option("--light-offset", relight_a.light_offset, "Light offset x,y,z in the camera frame")
        ->expected(3)
        ->delimiter(',');
    rl->add_option("--light-dir", relight_a.light_dir, "Spotlight axis x,y,z in the camera frame (decouples it)")
        ->expected(3)
        ->delimiter(',');
    rl->add_option("--intensity-scale", relight_a.intensity_scale, "Light intensity multiplier in [0, 10]");
    rl->add_option("--spot-inner", relight_a.spot_inner, "Inner spot angle (radians)");
    rl->add_option("--spot-outer", relight_a.spot_outer, "Outer spot angle (radians)");
    rl->add_option("--atten-scale", relight_a.atten_scale, "Attenuation multiplier in [0, 10]");
    rl->add_option("--roughness-scale", relight_a.roughness_scale, "Roughness multiplier in [0, 10]");
    rl->add_option("--albedo-tint", relight_a.albedo_tint, "Albedo multiplier r,g,b in [0, 10]")
        ->expected(3)
        ->delimiter(',');
    rl->add_flag("--raw", relight_a.raw, "Also write the linear float buffer");
    rl->add_option("--threads", relight_a.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

    DecomposeArgs dec_a;
    auto* dc = app.add_subcommand("decompose", "Write albedo, diffuse, specular, normal and depth buffers");
    dc->add_option("--scene", dec_a.scene, "Scene file")->required()->check(CLI::ExistingFile);
    dc->add_option("--poses", dec_a.poses, "poses.json")->required()->check(CLI::ExistingFile);
    dc->add_option("--frame", dec_a.frame, "Pose name or index (default: first)");
    dc->add_option("--out", dec_a.out, "Output directory")->required();
    dc->add_flag("--raw", dec_a.raw, "Also write linear float buffers");
    dc->add_option("--threads", dec_a.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

    EvalArgs eval_a;
    auto* ev = app.add_subcommand("eval", "PSNR and SSIM against a dataset split");
    ev->add_option("--scene", eval_a.scene, "Scene file")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", eval_a.data, "Dataset directory")->required();
    ev->add_option("--split", eval_a.split, "test, train or all");
    ev->add_option("--out", eval_a.out, "CSV output (default: stdout)");
    ev->add_option("--threads", eval_a.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

    DeformArgs def_a;
    auto* df = app.add_subcommand("deform", "Apply a rigid, per-splat or cage deformation");
    df->add_option("--scene", def_a.scene, "Scene file")->required()->check(CLI::ExistingFile);
    df->add_option("--cage", def_a.cage, "Deformation JSON")->required()->check(CLI::ExistingFile);
    df->add_option("--out", def_a.out, "Output scene file")->required();

    ServeArgs serve_a;
    auto* sv = app.add_subcommand("serve", "Serve interactive relighting over HTTP");
    sv->add_option("--scene", serve_a.scene, "Scene file")->required()->check(CLI::ExistingFile);
    sv->add_option("--bind", serve_a.bind, "host:port (port 0 picks a free one)");
    sv->add_option("--max-size", serve_a.max_size, "Largest accepted width and height")->check(CLI::Range(16, 8192));
    sv->add_option("--queue-depth", serve_a.queue_depth, "Pending renders before 429")->check(CLI::PositiveNumber);
    sv->add_option("--threads", serve_a.threads, "Render threads (0: all cores)")->check(CLI::NonNegativeNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        CLI::App* target = &app;
        for (auto* sub : app.get_subcommands()) target = sub;
        out << target->help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        CLI::App* target = &app;
        for (auto* sub : app.get_subcommands()) target = sub;
        err << "error: " << e.what() << "\n\n" << target->help();
        return kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_a, out);
        if (tr->parsed()) return cmd_train(train_a, out, err);
        if (rd->parsed()) return cmd_render(render_a, out);
        if (rl->parsed()) return cmd_relight(relight_a, out);
        if (dc->parsed()) return cmd_decompose(dec_a, out);
        if (ev->parsed()) return cmd_eval(eval_a, out);
        if (df->parsed()) return cmd_deform(def_a, out);
        if (sv->parsed()) return cmd_serve(serve_a, out);
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const OverrideError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DatasetError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const SceneFormatError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ImageIoError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const DeformError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << app.help();
    return kExitConfig;
}

}  // namespace lumen::inline LUMEN_ABI
