#include "adc/dataio.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "adc/error.hpp"
#include "adc/hash.hpp"

namespace adc::dataio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kDepthMagic[4] = {'D', 'P', 'F', '1'};
constexpr char kParamsMagic[4] = {'A', 'D', 'C', 'P'};
constexpr std::uint32_t kParamsVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("unexpected end of file while reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32_array(std::ostream& os, const float* data, std::size_t n) {
    static_assert(sizeof(float) == 4);
    // Little-endian hosts dump directly; this codebase targets LE platforms.
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

void read_f32_array(std::istream& is, float* data, std::size_t n) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    if (!is) throw FormatError("unexpected end of file while reading f32 payload");
}

std::string canonical_json_text(const std::string& text, const char* what) {
    if (text.empty()) return {};
    try {
        return json::parse(text).dump();
    } catch (const json::exception& e) {
        throw FormatError(std::string(what) + ": invalid JSON: " + e.what());
    }
}

json load_json_file(const fs::path& file, const char* what) {
    std::ifstream is(file);
    if (!is) throw IoError(std::string("cannot open ") + file.string());
    try {
        json j;
        is >> j;
        return j;
    } catch (const json::exception& e) {
        throw FormatError(std::string(what) + ": invalid JSON in " + file.string() + ": " + e.what());
    }
}

void store_json_file(const json& j, const fs::path& file) {
    std::ofstream os(file);
    if (!os) throw IoError("cannot open " + file.string() + " for writing");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("failed writing " + file.string());
}

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void write_depth_raw(const DepthMap& m, const fs::path& file) {
    m.validate();
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot open " + file.string() + " for writing");
    os.write(kDepthMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(m.width));
    write_u32(os, static_cast<std::uint32_t>(m.height));
    write_u32(os, 0u);  // reserved
    write_f32_array(os, m.values.data(), m.values.size());
    if (!os) throw IoError("failed writing " + file.string());
}

DepthMap read_depth_raw(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot open " + file.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kDepthMagic, 4) != 0)
        throw FormatError("bad depth raster magic in " + file.string());
    const std::uint32_t w = read_u32(is);
    const std::uint32_t h = read_u32(is);
    read_u32(is);  // reserved
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
        throw FormatError("implausible raster dimensions in " + file.string());
    DepthMap m(static_cast<int>(w), static_cast<int>(h));
    read_f32_array(is, m.values.data(), m.values.size());
    m.validate();
    return m;
}

void write_png(const ImageRgb8& img, const fs::path& file) {
    cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.data.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(file.string(), bgr))
        throw IoError("failed writing PNG " + file.string());
}

ImageRgb8 read_png(const fs::path& file) {
    cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot read PNG " + file.string());
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    ImageRgb8 img(rgb.cols, rgb.rows);
    if (rgb.isContinuous()) {
        std::memcpy(img.data.data(), rgb.data, img.data.size());
    } else {
        for (int y = 0; y < rgb.rows; ++y)
            std::memcpy(img.px(0, y), rgb.ptr(y), static_cast<std::size_t>(rgb.cols) * 3);
    }
    return img;
}

std::filesystem::path write_sample(const Sample& s, const fs::path& dir) {
    validate_sample(s);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create sample directory " + dir.string());

    write_png(s.rgb, dir / "rgb.png");
    write_depth_raw(s.dense_depth, dir / "depth.raw");
    write_depth_raw(s.sparse_depth, dir / "sparse.raw");

    json boxes = json::array();
    for (const auto& b : s.boxes)
        boxes.push_back(json{{"x_min", b.x_min},
                             {"y_min", b.y_min},
                             {"x_max", b.x_max},
                             {"y_max", b.y_max},
                             {"class_id", b.class_id},
                             {"score", b.score}});
    store_json_file(boxes, dir / "boxes.json");

    json meta{{"fx", s.meta.fx},
              {"fy", s.meta.fy},
              {"cx", s.meta.cx},
              {"cy", s.meta.cy},
              {"seed", s.meta.seed},
              {"sparse_density", s.sparse_depth.density}};
    meta["provenance"] =
        s.meta.provenance.empty() ? json() : json::parse(canonical_json_text(s.meta.provenance, "meta.provenance"));
    store_json_file(meta, dir / "meta.json");
    return dir;
}

Sample read_sample(const fs::path& dir) {
    Sample s;
    s.rgb = read_png(dir / "rgb.png");
    s.dense_depth = read_depth_raw(dir / "depth.raw");
    DepthMap sparse = read_depth_raw(dir / "sparse.raw");

    const json boxes = load_json_file(dir / "boxes.json", "boxes.json");
    if (!boxes.is_array()) throw FormatError("boxes.json: expected an array");
    for (const auto& jb : boxes) {
        BoundingBox b;
        try {
            jb.at("x_min").get_to(b.x_min);
            jb.at("y_min").get_to(b.y_min);
            jb.at("x_max").get_to(b.x_max);
            jb.at("y_max").get_to(b.y_max);
            jb.at("class_id").get_to(b.class_id);
            jb.at("score").get_to(b.score);
        } catch (const json::exception& e) {
            throw FormatError(std::string("boxes.json: bad record: ") + e.what());
        }
        s.boxes.push_back(b);
    }

    const json meta = load_json_file(dir / "meta.json", "meta.json");
    try {
        meta.at("fx").get_to(s.meta.fx);
        meta.at("fy").get_to(s.meta.fy);
        meta.at("cx").get_to(s.meta.cx);
        meta.at("cy").get_to(s.meta.cy);
        meta.at("seed").get_to(s.meta.seed);
        s.sparse_depth = SparseDepthMap(sparse, meta.at("sparse_density").get<double>());
        if (meta.contains("provenance") && !meta.at("provenance").is_null())
            s.meta.provenance = meta.at("provenance").dump();
    } catch (const json::exception& e) {
        throw FormatError(std::string("meta.json: bad record: ") + e.what());
    }

    validate_sample(s);
    return s;
}

std::vector<fs::path> list_sample_dirs(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory() && fs::exists(e.path() / "rgb.png")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

std::filesystem::path save_checkpoint(const NetworkState& state, const ModelConfig& config,
                                      int epoch, const fs::path& dir) {
    config.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir.string());

    std::ofstream os(dir / "params.bin", std::ios::binary);
    if (!os) throw IoError("cannot open params.bin for writing in " + dir.string());
    os.write(kParamsMagic, 4);
    write_u32(os, kParamsVersion);
    write_u32(os, static_cast<std::uint32_t>(state.params.size()));
    for (const auto& p : state.params) {
        write_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_u32(os, static_cast<std::uint32_t>(p.shape.size()));
        for (int d : p.shape) write_u32(os, static_cast<std::uint32_t>(d));
        if (p.values.size() != static_cast<std::size_t>(p.size()))
            throw ValidationError("save_checkpoint: param '" + p.name + "' shape/value mismatch");
        write_f32_array(os, p.values.data(), p.values.size());
    }
    if (!os) throw IoError("failed writing params.bin in " + dir.string());

    const std::string cfg_text = config.to_json_string();
    {
        std::ofstream cs(dir / "config.json");
        if (!cs) throw IoError("cannot open config.json for writing in " + dir.string());
        cs << cfg_text << '\n';
    }
    store_json_file(json{{"config_hash", config.config_hash()},
                         {"epoch", epoch},
                         {"created_at", iso8601_now()}},
                    dir / "manifest.json");
    return dir;
}

Checkpoint load_checkpoint(const fs::path& dir) {
    Checkpoint ck;

    std::string cfg_text;
    {
        std::ifstream cs(dir / "config.json");
        if (!cs) throw IoError("cannot open config.json in " + dir.string());
        std::string line, all;
        while (std::getline(cs, line)) all += line + "\n";
        cfg_text = all;
    }
    ck.config = ModelConfig::from_json_string(cfg_text);

    const json manifest = load_json_file(dir / "manifest.json", "manifest.json");
    std::string recorded_hash;
    try {
        manifest.at("config_hash").get_to(recorded_hash);
        manifest.at("epoch").get_to(ck.epoch);
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest.json: bad record: ") + e.what());
    }
    if (recorded_hash != ck.config.config_hash())
        throw FormatError("checkpoint config hash mismatch in " + dir.string());

    std::ifstream is(dir / "params.bin", std::ios::binary);
    if (!is) throw IoError("cannot open params.bin in " + dir.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kParamsMagic, 4) != 0)
        throw FormatError("bad params.bin magic in " + dir.string());
    if (read_u32(is) != kParamsVersion)
        throw FormatError("unsupported params.bin version in " + dir.string());
    const std::uint32_t count = read_u32(is);
    ck.state.params.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ParamBlob& p = ck.state.params[i];
        const std::uint32_t name_len = read_u32(is);
        if (name_len > 4096) throw FormatError("implausible parameter name length");
        p.name.resize(name_len);
        is.read(p.name.data(), name_len);
        const std::uint32_t ndims = read_u32(is);
        if (ndims > 8) throw FormatError("implausible parameter rank");
        p.shape.resize(ndims);
        for (auto& d : p.shape) d = static_cast<int>(read_u32(is));
        const auto n = static_cast<std::size_t>(p.size());
        p.values.resize(n);
        read_f32_array(is, p.values.data(), n);
    }
    return ck;
}

}  // namespace adc::dataio
