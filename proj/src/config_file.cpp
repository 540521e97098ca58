// SPDX-License-Identifier: Apache-2.0
#include "lumen/config_file.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lumen::inline LUMEN_ABI {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return k.front() != '.' && k.back() != '.' && k.find("..") == std::string::npos;
}

int bracket_balance(const std::string& s) {
    int depth = 0;
    bool quoted = false;
    for (char c : s) {
        if (c == '"') quoted = !quoted;
        if (quoted) continue;
        if (c == '[') ++depth;
        if (c == ']') --depth;
    }
    return depth;
}

class ValueParser {
public:
    explicit ValueParser(const std::string& s) : s_(s) {}

    ConfigValue parse_all() {
        ConfigValue v = parse();
        skip_ws();
        if (pos_ != s_.size()) throw std::invalid_argument("unexpected trailing characters");
        return v;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    ConfigValue parse() {
        skip_ws();
        if (pos_ >= s_.size()) throw std::invalid_argument("missing value");
        ConfigValue v;
        const char c = s_[pos_];
        if (c == '[') {
            v.kind = ConfigValue::Kind::Array;
            ++pos_;
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == ']') {
                ++pos_;
                return v;
            }
            while (true) {
                v.items.push_back(parse());
                skip_ws();
                if (pos_ >= s_.size()) throw std::invalid_argument("unterminated array");
                if (s_[pos_] == ',') {
                    ++pos_;
                    skip_ws();
                    if (pos_ < s_.size() && s_[pos_] == ']') {
                        ++pos_;
                        return v;
                    }
                    continue;
                }
                if (s_[pos_] == ']') {
                    ++pos_;
                    return v;
                }
                throw std::invalid_argument("expected ',' or ']' in array");
            }
        }
        if (c == '"') {
            v.kind = ConfigValue::Kind::String;
            const std::size_t end = s_.find('"', pos_ + 1);
            if (end == std::string::npos) throw std::invalid_argument("unterminated string");
            v.text = s_.substr(pos_ + 1, end - pos_ - 1);
            pos_ = end + 1;
            return v;
        }
        std::size_t end = pos_;
        while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && !std::isspace(static_cast<unsigned char>(s_[end])))
            ++end;
        const std::string token = s_.substr(pos_, end - pos_);
        pos_ = end;
        if (token == "true" || token == "false") {
            v.kind = ConfigValue::Kind::Bool;
            v.boolean = token == "true";
            return v;
        }
        char* stop = nullptr;
        v.number = std::strtod(token.c_str(), &stop);
        if (token.empty() || stop != token.c_str() + token.size() || !std::isfinite(v.number))
            throw std::invalid_argument("invalid value '" + token + "'");
        v.kind = ConfigValue::Kind::Number;
        return v;
    }
};

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
    ConfigFile cf;
    cf.origin_ = origin;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    auto fail_at = [&](int line, const std::string& m) {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + m);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[' && line.find('=') == std::string::npos) {
            if (line.back() != ']') fail_at(line_no, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_key(section)) fail_at(line_no, "invalid section name '" + section + "'");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail_at(line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (!valid_key(key)) fail_at(line_no, "invalid key '" + key + "'");
        std::string value = trim(line.substr(eq + 1));
        const int start = line_no;
        while (bracket_balance(value) > 0 && std::getline(in, raw)) {
            ++line_no;
            value += " " + trim(strip_comment(raw));
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (cf.values_.count(full)) fail_at(start, "duplicate key '" + full + "'");
        try {
            cf.values_[full] = ValueParser(value).parse_all();
        } catch (const std::invalid_argument& e) {
            fail_at(start, full + ": " + e.what());
        }
        cf.lines_[full] = start;
    }
    return cf;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void ConfigFile::fail(const std::string& key, const std::string& message) const {
    const auto it = lines_.find(key);
    const std::string where = it == lines_.end() ? origin_ : origin_ + ":" + std::to_string(it->second);
    throw ConfigError(where + ": " + key + ": " + message);
}

bool ConfigFile::has(const std::string& key) const { return values_.count(key) > 0; }

const ConfigValue& ConfigFile::at(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing key " + key);
    used_.insert(key);
    return it->second;
}

double ConfigFile::number(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.kind != ConfigValue::Kind::Number) fail(key, "expected a number");
    return v.number;
}

std::int64_t ConfigFile::integer(const std::string& key) const {
    const double d = number(key);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) fail(key, "expected an integer");
    return static_cast<std::int64_t>(d);
}

bool ConfigFile::boolean(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.kind != ConfigValue::Kind::Bool) fail(key, "expected true or false");
    return v.boolean;
}

std::string ConfigFile::string(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.kind != ConfigValue::Kind::String) fail(key, "expected a quoted string");
    return v.text;
}

std::vector<double> ConfigFile::numbers(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.kind != ConfigValue::Kind::Array) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& item : v.items) {
        if (item.kind != ConfigValue::Kind::Number) fail(key, "expected an array of numbers");
        out.push_back(item.number);
    }
    return out;
}

Vec3 ConfigFile::vec3(const std::string& key) const {
    const auto v = numbers(key);
    if (v.size() != 3) fail(key, "expected 3 numbers");
    return Vec3(Real(v[0]), Real(v[1]), Real(v[2]));
}

void ConfigFile::reject_unused(const std::string& prefix) const {
    for (const auto& [key, value] : values_)
        if (key.rfind(prefix, 0) == 0 && !used_.count(key)) fail(key, "unknown key");
}

void ConfigFile::reject_sections(const std::set<std::string>& sections) const {
    for (const auto& [key, value] : values_) {
        const std::string top = key.substr(0, key.find('.'));
        if (key.find('.') == std::string::npos || !sections.count(top)) fail(key, "unknown section or key");
    }
}

std::vector<std::string> ConfigFile::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
}

namespace {

template <class T>
void read_real(const ConfigFile& f, const std::string& key, T& out) {
    if (f.has(key)) out = static_cast<T>(f.number(key));
}

template <class T>
void read_int(const ConfigFile& f, const std::string& key, T& out) {
    if (f.has(key)) out = static_cast<T>(f.integer(key));
}

void read_bool(const ConfigFile& f, const std::string& key, bool& out) {
    if (f.has(key)) out = f.boolean(key);
}

}  // namespace

void apply_train_config(const ConfigFile& f, TrainConfig& c) {
    read_int(f, "train.iterations", c.iterations);
    read_real(f, "train.noise_sigma", c.noise_sigma);
    read_bool(f, "train.use_hash", c.use_hash);
    if (f.has("train.seed")) {
        const auto s = f.integer("train.seed");
        if (s < 0) throw ConfigError("train.seed must be >= 0");
        c.seed = static_cast<std::uint64_t>(s);
    }
    read_int(f, "train.log_every", c.log_every);
    read_int(f, "train.checkpoint_every", c.checkpoint_every);
    if (f.has("train.checkpoint_dir")) c.checkpoint_dir = f.string("train.checkpoint_dir");
    read_int(f, "train.threads", c.threads);

    read_real(f, "train.lr.position", c.lr.position);
    read_real(f, "train.lr.rotation", c.lr.rotation);
    read_real(f, "train.lr.scale", c.lr.scale);
    read_real(f, "train.lr.opacity", c.lr.opacity);
    read_real(f, "train.lr.material", c.lr.material);
    read_real(f, "train.lr.light", c.lr.light);
    read_real(f, "train.lr.mlp", c.lr.mlp);
    read_real(f, "train.lr.hash", c.lr.hash);

    read_real(f, "train.weights.rgb", c.weights.rgb);
    read_real(f, "train.weights.dssim", c.weights.dssim);
    read_real(f, "train.weights.depth", c.weights.depth);
    read_real(f, "train.weights.normal", c.weights.normal);
    read_real(f, "train.weights.diffuse", c.weights.diffuse);
    read_real(f, "train.weights.tissue", c.weights.tissue);

    read_bool(f, "train.densify.enabled", c.densify.enabled);
    read_int(f, "train.densify.start", c.densify.start);
    read_int(f, "train.densify.interval", c.densify.interval);
    read_int(f, "train.densify.stop", c.densify.stop);
    read_real(f, "train.densify.grad_threshold", c.densify.grad_threshold);
    read_real(f, "train.densify.split_scale", c.densify.split_scale);
    read_real(f, "train.densify.prune_opacity", c.densify.prune_opacity);
    read_int(f, "train.densify.max_splats", c.densify.max_splats);

    f.reject_unused("train.");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void apply_tube_config(const ConfigFile& f, TubeSpec& s) {
    if (f.has("tube.centerline")) {
        const ConfigValue& v = f.at("tube.centerline");
        if (v.kind != ConfigValue::Kind::Array) throw ConfigError("tube.centerline: expected an array of 3-vectors");
        s.centerline.clear();
        for (const auto& p : v.items) {
            if (p.kind != ConfigValue::Kind::Array || p.items.size() != 3)
                throw ConfigError("tube.centerline: expected an array of 3-vectors");
            Vec3d q;
            for (int a = 0; a < 3; ++a) {
                if (p.items[a].kind != ConfigValue::Kind::Number)
                    throw ConfigError("tube.centerline: expected numbers");
                q[a] = p.items[a].number;
            }
            s.centerline.push_back(q);
        }
    }
    if (f.has("tube.radii")) s.radii = f.numbers("tube.radii");
    read_real(f, "tube.bump_amplitude", s.bump_amplitude);
    read_real(f, "tube.bump_axial_freq", s.bump_axial_freq);
    read_int(f, "tube.bump_lobes", s.bump_lobes);
    if (f.has("tube.albedo")) s.albedo = f.vec3("tube.albedo");
    if (f.has("tube.band_albedo")) s.band_albedo = f.vec3("tube.band_albedo");
    read_int(f, "tube.bands", s.bands);
    read_real(f, "tube.roughness", s.roughness);
    read_real(f, "tube.f0", s.f0);

    if (f.has("tube.light.offset")) s.light.offset = f.vec3("tube.light.offset");
    if (f.has("tube.light.intensity")) s.light.intensity = f.vec3("tube.light.intensity");
    if (f.has("tube.light.atten_coeffs")) s.light.atten_coeffs = f.vec3("tube.light.atten_coeffs");
    read_real(f, "tube.light.spot_inner", s.light.spot_inner);
    read_real(f, "tube.light.spot_outer", s.light.spot_outer);

    auto& t = s.trajectory;
    read_int(f, "tube.trajectory.frames", t.frames);
    read_real(f, "tube.trajectory.t_begin", t.t_begin);
    read_real(f, "tube.trajectory.t_end", t.t_end);
    read_int(f, "tube.trajectory.test_every", t.test_every);
    read_real(f, "tube.trajectory.fov_deg", t.fov_deg);
    read_int(f, "tube.trajectory.width", t.width);
    read_int(f, "tube.trajectory.height", t.height);
    read_real(f, "tube.trajectory.train_roll_deg", t.train_roll_deg);
    read_real(f, "tube.trajectory.train_pitch_deg", t.train_pitch_deg);
    read_real(f, "tube.trajectory.test_roll_deg", t.test_roll_deg);
    read_real(f, "tube.trajectory.test_pitch_deg", t.test_pitch_deg);

    f.reject_unused("tube.");
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

GenConfig gen_config_from(const ConfigFile& f) {
    GenConfig g;
    if (f.has("gen.points")) {
        const auto p = f.integer("gen.points");
        if (p < 1) throw ConfigError("gen.points must be >= 1");
        g.points = static_cast<std::size_t>(p);
    }
    if (f.has("gen.seed")) {
        const auto s = f.integer("gen.seed");
        if (s < 0) throw ConfigError("gen.seed must be >= 0");
        g.seed = static_cast<std::uint64_t>(s);
    }
    f.reject_unused("gen.");
    apply_tube_config(f, g.tube);
    return g;
}

}  // namespace lumen::inline LUMEN_ABI
