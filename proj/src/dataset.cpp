#include "mkd/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "mkd/rng.hpp"

namespace mkd {

namespace {

const std::vector<DatasetInfo>& registry() {
    static const std::vector<DatasetInfo> r = {
        {"synth-digits", 10, {1, 16, 16}, true},
        {"mnist", 10, {1, 28, 28}, false},
        {"fashion-mnist", 10, {1, 28, 28}, false},
        {"cifar10", 10, {3, 32, 32}, false},
        {"cifar100", 100, {3, 32, 32}, false},
        {"tiny-imagenet", 200, {3, 64, 64}, false},
        {"imagenet100", 100, {3, 224, 224}, false},
    };
    return r;
}

struct Point {
    double x, y;
};
using Stroke = std::vector<Point>;

std::vector<Point> ellipse(double cx, double cy, double rx, double ry, int n = 18) {
    std::vector<Point> p;
    for (int i = 0; i <= n; ++i) {
        const double t = 6.283185307179586 * i / n;
        p.push_back({cx + rx * std::sin(t), cy - ry * std::cos(t)});
    }
    return p;
}

// Stroke skeletons on the unit square, x to the right and y downwards.
const std::array<std::vector<Stroke>, 10>& glyphs() {
    static const std::array<std::vector<Stroke>, 10> g = {{
        {ellipse(0.5, 0.5, 0.26, 0.37)},
        {{{0.36, 0.27}, {0.52, 0.12}, {0.52, 0.88}}},
        {{{0.26, 0.3}, {0.36, 0.15}, {0.55, 0.12}, {0.72, 0.22}, {0.72, 0.38}, {0.26, 0.88}, {0.78, 0.88}}},
        {{{0.26, 0.15}, {0.72, 0.15}, {0.45, 0.45}, {0.68, 0.54}, {0.72, 0.74}, {0.55, 0.88}, {0.25, 0.82}}},
        {{{0.64, 0.88}, {0.64, 0.12}, {0.22, 0.62}, {0.8, 0.62}}},
        {{{0.74, 0.12}, {0.32, 0.12}, {0.28, 0.45}, {0.55, 0.41}, {0.73, 0.55}, {0.72, 0.75}, {0.55, 0.88}, {0.25, 0.82}}},
        {{{0.68, 0.12}, {0.42, 0.28}, {0.28, 0.58}, {0.34, 0.84}, {0.58, 0.88}, {0.72, 0.7}, {0.6, 0.52}, {0.3, 0.6}}},
        {{{0.22, 0.12}, {0.78, 0.12}, {0.42, 0.88}}},
        {ellipse(0.5, 0.3, 0.19, 0.17), ellipse(0.5, 0.68, 0.23, 0.2)},
        {ellipse(0.48, 0.33, 0.2, 0.2), {{0.68, 0.35}, {0.64, 0.62}, {0.56, 0.88}}},
    }};
    return g;
}

double segment_distance(Point p, Point a, Point b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

void render_digit(int cls, std::size_t size, double difficulty, Rng& rng, Scalar* out) {
    const double d = difficulty;
    const double angle = standard_normal(rng) * 0.21 * d;  // about 12 degrees
    const double sx = 1.0 + (uniform01(rng) - 0.5) * 0.25 * d;
    const double sy = 1.0 + (uniform01(rng) - 0.5) * 0.25 * d;
    const double shear = (uniform01(rng) - 0.5) * 0.3 * d;
    const double tx = (uniform01(rng) - 0.5) * 0.16 * d;
    const double ty = (uniform01(rng) - 0.5) * 0.16 * d;
    const double half_width = 0.045 + 0.04 * uniform01(rng);
    const double ink = 0.7 + 0.3 * uniform01(rng);
    const double jitter = 0.035 * d;
    const double ca = std::cos(angle), sa = std::sin(angle);

    std::vector<Stroke> strokes = glyphs()[static_cast<std::size_t>(cls)];
    for (auto& s : strokes)
        for (auto& p : s) {
            double x = p.x - 0.5 + standard_normal(rng) * jitter;
            double y = p.y - 0.5 + standard_normal(rng) * jitter;
            x = (x + shear * y) * sx;
            y *= sy;
            p = {ca * x - sa * y + 0.5 + tx, sa * x + ca * y + 0.5 + ty};
        }

    const double aa = 1.0 / static_cast<double>(size);
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c) {
            const Point px{(static_cast<double>(c) + 0.5) / static_cast<double>(size),
                           (static_cast<double>(r) + 0.5) / static_cast<double>(size)};
            double dist = 1e9;
            for (const auto& s : strokes)
                for (std::size_t i = 0; i + 1 < s.size(); ++i) dist = std::min(dist, segment_distance(px, s[i], s[i + 1]));
            double v = std::clamp((half_width - dist) / aa + 0.5, 0.0, 1.0) * ink;
            v += standard_normal(rng) * 0.05 * d;
            out[r * size + c] = std::clamp(v, 0.0, 1.0);
        }
}

void read_class_file(const std::filesystem::path& file, std::size_t per_image, int label, std::vector<Scalar>& pixels,
                     std::vector<int>& labels) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("missing class file " + file.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % (per_image * sizeof(float)) != 0)
        throw std::runtime_error(file.string() + ": size is not a multiple of the image size");
    in.seekg(0);
    std::vector<float> buf(bytes / sizeof(float));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    for (float v : buf) {
        if (!(v >= 0.0f && v <= 1.0f)) throw std::runtime_error(file.string() + ": pixel value outside [0, 1]");
        pixels.push_back(static_cast<Scalar>(v));
    }
    labels.insert(labels.end(), buf.size() / per_image, label);
}

void write_class_file(const std::filesystem::path& file, const Tensor& images, const std::vector<int>& labels, int label) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    const auto rs = images.row_size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != label) continue;
        for (std::size_t j = 0; j < rs; ++j) {
            const auto v = static_cast<float>(images.at(i, j));
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    }
}

}  // namespace

const DatasetInfo& dataset_info(const std::string& id) {
    for (const auto& d : registry())
        if (d.id == id) return d;
    std::string known;
    for (const auto& d : registry()) known += (known.empty() ? "" : ", ") + d.id;
    throw std::invalid_argument("unknown dataset '" + id + "' (known: " + known + ")");
}

std::vector<std::string> known_datasets() {
    std::vector<std::string> out;
    for (const auto& d : registry()) out.push_back(d.id);
    return out;
}

Dataset make_synth_digits(const SyntheticOptions& opt) {
    if (opt.image_size < 4) throw std::invalid_argument("synthetic image_size must be at least 4");
    Dataset d;
    d.id = "synth-digits";
    d.n_classes = 10;
    d.shape = {1, opt.image_size, opt.image_size};
    Rng rng = make_rng(opt.seed, RngStream::dataset);
    auto fill = [&](std::size_t per_class, Tensor& images, std::vector<int>& labels) {
        images = Tensor({per_class * d.n_classes, 1, opt.image_size, opt.image_size});
        labels.clear();
        std::size_t row = 0;
        for (std::size_t i = 0; i < per_class; ++i)
            for (int c = 0; c < static_cast<int>(d.n_classes); ++c, ++row) {
                render_digit(c, opt.image_size, opt.difficulty, rng, images.row(row).data());
                labels.push_back(c);
            }
    };
    fill(opt.train_per_class, d.train_images, d.train_labels);
    fill(opt.test_per_class, d.test_images, d.test_labels);
    return d;
}

Dataset load_dataset_dir(const std::filesystem::path& root, const std::string& id) {
    const auto dir = root / id;
    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in) throw std::runtime_error("dataset directory " + dir.string() + " has no meta.json");
    const auto meta = nlohmann::json::parse(meta_in);
    Dataset d;
    d.id = id;
    d.n_classes = meta.at("n_classes");
    d.shape = {meta.at("channels"), meta.at("height"), meta.at("width")};
    for (const char* split : {"train", "test"}) {
        std::vector<Scalar> pixels;
        std::vector<int> labels;
        for (std::size_t k = 0; k < d.n_classes; ++k)
            read_class_file(dir / split / ("class_" + std::to_string(k) + ".f32"), d.shape.size(), static_cast<int>(k),
                            pixels, labels);
        Tensor images({labels.size(), d.shape.channels, d.shape.height, d.shape.width}, std::move(pixels));
        if (std::string(split) == "train") {
            d.train_images = std::move(images);
            d.train_labels = std::move(labels);
        } else {
            d.test_images = std::move(images);
            d.test_labels = std::move(labels);
        }
    }
    return d;
}

void save_dataset_dir(const Dataset& d, const std::filesystem::path& root) {
    const auto dir = root / d.id;
    std::filesystem::create_directories(dir / "train");
    std::filesystem::create_directories(dir / "test");
    nlohmann::json meta{{"n_classes", d.n_classes},
                        {"channels", d.shape.channels},
                        {"height", d.shape.height},
                        {"width", d.shape.width}};
    std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
    for (std::size_t k = 0; k < d.n_classes; ++k) {
        const auto name = "class_" + std::to_string(k) + ".f32";
        write_class_file(dir / "train" / name, d.train_images, d.train_labels, static_cast<int>(k));
        write_class_file(dir / "test" / name, d.test_images, d.test_labels, static_cast<int>(k));
    }
}

std::filesystem::path dataset_root(const std::optional<std::filesystem::path>& explicit_root) {
    if (explicit_root) return *explicit_root;
    if (const char* env = std::getenv("MKD_DATA_ROOT"); env && *env) return env;
    return "data";
}

Dataset load_dataset(const std::string& id, const SyntheticOptions& synth,
                     const std::optional<std::filesystem::path>& root) {
    const auto& info = dataset_info(id);
    if (info.synthetic) return make_synth_digits(synth);
    Dataset d = load_dataset_dir(dataset_root(root), id);
    if (d.n_classes != info.n_classes)
        throw std::runtime_error("dataset " + id + " on disk has " + std::to_string(d.n_classes) + " classes, expected " +
                                 std::to_string(info.n_classes));
    return d;
}

}  // namespace mkd
