#include "fishrec/model_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "fishrec/errors.hpp"

namespace fishrec {

namespace {

constexpr char kMagic[8] = {'F', 'R', 'E', 'C', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    void vec(const Eigen::VectorXd& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        raw(v.data(), static_cast<std::size_t>(v.size()) * 8);
    }
    void mat(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        raw(m.data(), static_cast<std::size_t>(m.size()) * 8);
    }
    void rect(const Rect& r) {
        f64(r.center.x);
        f64(r.center.y);
        f64(r.size.x);
        f64(r.size.y);
    }
    const std::string& data() const { return buf_; }

private:
    void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    std::string buf_;
};

class Reader {
public:
    explicit Reader(const std::string& buf) : buf_(buf) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(buf_[take(1)]); }
    std::uint32_t u32() { std::uint32_t v; std::memcpy(&v, buf_.data() + take(4), 4); return v; }
    std::uint64_t u64() { std::uint64_t v; std::memcpy(&v, buf_.data() + take(8), 8); return v; }
    std::int32_t i32() { std::int32_t v; std::memcpy(&v, buf_.data() + take(4), 4); return v; }
    double f64() { double v; std::memcpy(&v, buf_.data() + take(8), 8); return v; }
    std::string str() {
        const std::uint64_t n = u64();
        const std::size_t at = take(n);
        return buf_.substr(at, n);
    }
    Eigen::VectorXd vec() {
        const std::uint64_t n = u64();
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        std::memcpy(v.data(), buf_.data() + take(n * 8), n * 8);
        return v;
    }
    Eigen::MatrixXd mat() {
        const std::uint64_t r = u64(), c = u64();
        Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        std::memcpy(m.data(), buf_.data() + take(r * c * 8), r * c * 8);
        return m;
    }
    Rect rect() {
        Rect r;
        r.center.x = f64();
        r.center.y = f64();
        r.size.x = f64();
        r.size.y = f64();
        return r;
    }

private:
    std::size_t take(std::uint64_t n) {
        if (pos_ + n > buf_.size()) throw data_error("model file: truncated payload");
        const std::size_t at = pos_;
        pos_ += n;
        return at;
    }
    const std::string& buf_;
    std::size_t pos_ = 0;
};

void write_svm(Writer& w, const SvmModel& svm) {
    w.f64(svm.gamma);
    w.f64(svm.bias);
    w.f64(svm.c_pos);
    w.f64(svm.c_neg);
    w.f64(svm.kkt_gap);
    w.vec(svm.coef);
    w.mat(svm.support_vectors);
}

SvmModel read_svm(Reader& r) {
    SvmModel svm;
    svm.gamma = r.f64();
    svm.bias = r.f64();
    svm.c_pos = r.f64();
    svm.c_neg = r.f64();
    svm.kkt_gap = r.f64();
    svm.coef = r.vec();
    svm.support_vectors = r.mat();
    return svm;
}

void write_tree(Writer& w, const HierarchyNode* node) {
    if (!node) {
        w.u8(0);
        return;
    }
    if (node->is_leaf()) {
        w.u8(1);
        w.i32(node->species);
        return;
    }
    w.u8(2);
    write_svm(w, node->svm);
    w.f64(node->threshold);
    w.u64(node->pos_species.size());
    for (int s : node->pos_species) w.i32(s);
    w.u64(node->neg_species.size());
    for (int s : node->neg_species) w.i32(s);
    write_tree(w, node->pos_child.get());
    write_tree(w, node->neg_child.get());
}

std::unique_ptr<HierarchyNode> read_tree(Reader& r) {
    const std::uint8_t tag = r.u8();
    if (tag == 0) return nullptr;
    auto node = std::make_unique<HierarchyNode>();
    if (tag == 1) {
        node->species = r.i32();
        return node;
    }
    if (tag != 2) throw data_error("model file: bad hierarchy node tag");
    node->svm = read_svm(r);
    node->threshold = r.f64();
    node->pos_species.resize(r.u64());
    for (auto& s : node->pos_species) s = r.i32();
    node->neg_species.resize(r.u64());
    for (auto& s : node->neg_species) s = r.i32();
    node->pos_child = read_tree(r);
    node->neg_child = read_tree(r);
    return node;
}

void write_part_set(Writer& w, const PartSet& ps) {
    w.u64(ps.points.size());
    for (const auto& p : ps.points) {
        w.f64(p.x);
        w.f64(p.y);
    }
    w.f64(ps.centroid.x);
    w.f64(ps.centroid.y);
    w.f64(ps.axis1.x);
    w.f64(ps.axis1.y);
    w.f64(ps.axis2.x);
    w.f64(ps.axis2.y);
    w.f64(ps.extent1);
}

PartSet read_part_set(Reader& r) {
    PartSet ps;
    ps.points.resize(r.u64());
    for (auto& p : ps.points) {
        p.x = r.f64();
        p.y = r.f64();
    }
    ps.centroid.x = r.f64();
    ps.centroid.y = r.f64();
    ps.axis1.x = r.f64();
    ps.axis1.y = r.f64();
    ps.axis2.x = r.f64();
    ps.axis2.y = r.f64();
    ps.extent1 = r.f64();
    return ps;
}

}  // namespace

void save_model(const std::string& path, const TrainedModel& model) {
    Writer w;
    w.str(to_text(model.config));
    w.f64(model.chosen_c);

    w.u64(model.species_names.size());
    for (const auto& name : model.species_names) w.str(name);

    const PartModel& pm = model.part_model;
    w.i32(pm.k);
    w.u64(pm.appearance.size());
    for (const auto& p : pm.appearance) w.vec(p);
    w.u64(pm.layout.size());
    for (const auto& rects : pm.layout) {
        w.u64(rects.size());
        for (const auto& r : rects) w.rect(r);
    }
    w.vec(pm.pca.mean);
    w.mat(pm.pca.basis);
    write_part_set(w, pm.reference);
    w.u64(pm.reference_rects.size());
    for (const auto& r : pm.reference_rects) w.rect(r);
    w.u64(pm.mean_layout.size());
    for (const auto& r : pm.mean_layout) w.rect(r);
    w.i32(pm.reference_index);

    write_tree(w, model.tree.get());

    const std::string& payload = w.data();
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size())));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write model file: " + path);
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kVersion), 4);
    const std::uint64_t size = payload.size();
    out.write(reinterpret_cast<const char*>(&size), 8);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.write(reinterpret_cast<const char*>(&crc), 4);
    if (!out) throw data_error("failed writing model file: " + path);
}

TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open model file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw data_error("not a model file: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != kVersion)
        throw data_error("model file version " + std::to_string(version) +
                         " is not supported (expected " + std::to_string(kVersion) + ")");
    std::uint64_t size = 0;
    in.read(reinterpret_cast<char*>(&size), 8);
    std::string payload(size, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(size));
    std::uint32_t stored_crc = 0;
    in.read(reinterpret_cast<char*>(&stored_crc), 4);
    if (!in) throw data_error("model file: truncated: " + path);
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size())));
    if (crc != stored_crc) throw data_error("model file checksum mismatch: " + path);

    Reader r(payload);
    TrainedModel model;
    model.config = parse_config(r.str());
    model.chosen_c = r.f64();

    model.species_names.resize(r.u64());
    for (auto& name : model.species_names) name = r.str();

    PartModel& pm = model.part_model;
    pm.k = r.i32();
    pm.appearance.resize(r.u64());
    for (auto& p : pm.appearance) p = r.vec();
    pm.layout.resize(r.u64());
    for (auto& rects : pm.layout) {
        rects.resize(r.u64());
        for (auto& rect : rects) rect = r.rect();
    }
    pm.pca.mean = r.vec();
    pm.pca.basis = r.mat();
    pm.reference = read_part_set(r);
    pm.reference_rects.resize(r.u64());
    for (auto& rect : pm.reference_rects) rect = r.rect();
    pm.mean_layout.resize(r.u64());
    for (auto& rect : pm.mean_layout) rect = r.rect();
    pm.reference_index = r.i32();
    pm.config = model.config.learn;

    model.tree = read_tree(r);
    return model;
}

}  // namespace fishrec
