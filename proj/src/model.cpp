#include "condseg/model.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "condseg/error.hpp"

namespace condseg {

const char* architecture_name(Architecture a) {
    return a == Architecture::unet ? "unet" : "encoder_decoder";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "unet") return Architecture::unet;
    if (s == "encoder_decoder") return Architecture::encoder_decoder;
    throw ConfigError("unknown architecture: " + s);
}

// ---------------------------------------------------------------------------
// FusionSpec
// ---------------------------------------------------------------------------

void FusionSpec::validate() const {
    switch (mechanism) {
        case Mechanism::none:
            if (site.has_value()) throw ConfigError("fusion: baseline takes no site");
            break;
        case Mechanism::concat_raw:
        case Mechanism::concat_mlp:
            if (!site.has_value() || *site == FusionSite::decoder)
                throw ConfigError("fusion: concatenation requires site early|middle|late");
            break;
        case Mechanism::film:
            if (!site.has_value() || (*site != FusionSite::decoder && *site != FusionSite::late))
                throw ConfigError("fusion: film requires site decoder|late");
            break;
    }
}

std::string FusionSpec::variant_id() const {
    if (mechanism == Mechanism::none) return "baseline";
    std::string m = mechanism == Mechanism::concat_raw   ? "concat_raw"
                    : mechanism == Mechanism::concat_mlp ? "concat_mlp"
                                                         : "film";
    std::string s = *site == FusionSite::early    ? "early"
                    : *site == FusionSite::middle ? "middle"
                    : *site == FusionSite::late   ? "late"
                                                  : "decoder";
    return m + "_" + s;
}

const std::vector<std::string>& FusionSpec::variant_ids() {
    static const std::vector<std::string> ids = {
        "baseline",         "concat_raw_early", "concat_raw_middle",
        "concat_raw_late",  "concat_mlp_early", "concat_mlp_middle",
        "concat_mlp_late",  "film_decoder",     "film_late"};
    return ids;
}

FusionSpec FusionSpec::parse(const std::string& architecture, const std::string& variant) {
    FusionSpec f;
    f.architecture = architecture_from_string(architecture);
    if (variant == "baseline") {
        f.mechanism = Mechanism::none;
        f.validate();
        return f;
    }
    const auto us = variant.rfind('_');
    if (us == std::string::npos) throw ConfigError("unknown variant: " + variant);
    const std::string mech = variant.substr(0, us);
    const std::string site = variant.substr(us + 1);
    if (mech == "concat_raw")
        f.mechanism = Mechanism::concat_raw;
    else if (mech == "concat_mlp")
        f.mechanism = Mechanism::concat_mlp;
    else if (mech == "film")
        f.mechanism = Mechanism::film;
    else
        throw ConfigError("unknown variant: " + variant);
    if (site == "early")
        f.site = FusionSite::early;
    else if (site == "middle")
        f.site = FusionSite::middle;
    else if (site == "late")
        f.site = FusionSite::late;
    else if (site == "decoder")
        f.site = FusionSite::decoder;
    else
        throw ConfigError("unknown fusion site: " + site);
    f.validate();
    return f;
}

// ---------------------------------------------------------------------------
// BackboneConfig
// ---------------------------------------------------------------------------

void BackboneConfig::validate() const {
    if (in_channels < 1 || num_classes < 2) throw ConfigError("backbone: bad channel config");
    if (depth < 1 || depth > 6) throw ConfigError("backbone: depth out of range [1,6]");
    if (base_channels < 1) throw ConfigError("backbone: base_channels must be >= 1");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("backbone: bad bn momentum");
}

int BackboneConfig::stage_channels(int i) const { return base_channels << i; }

// ---------------------------------------------------------------------------
// SegmentationModel
// ---------------------------------------------------------------------------

SegmentationModel::SegmentationModel(BackboneConfig cfg, FusionSpec fusion, uint64_t seed)
    : cfg_(cfg), fusion_(fusion), seed_(seed) {
    cfg_.validate();
    fusion_.validate();
    skips_ = fusion_.architecture == Architecture::unet;
    build();
    register_params();
    init_all_params();
}

void SegmentationModel::build() {
    const int d = cfg_.depth;
    const bool early = fusion_.mechanism != Mechanism::none && fusion_.mechanism != Mechanism::film &&
                       *fusion_.site == FusionSite::early;
    const bool middle = fusion_.mechanism != Mechanism::none && fusion_.mechanism != Mechanism::film &&
                        *fusion_.site == FusionSite::middle;
    const bool late_concat = fusion_.mechanism != Mechanism::none &&
                             fusion_.mechanism != Mechanism::film && *fusion_.site == FusionSite::late;

    if (fusion_.mechanism == Mechanism::concat_mlp) embed_ = std::make_unique<EmbeddingMlp>();

    int in = cfg_.in_channels + (early ? 3 : 0);
    enc_.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        enc_.emplace_back(in, cfg_.stage_channels(i), cfg_.bn_momentum);
        in = cfg_.stage_channels(i);
    }

    const int cb = cfg_.bottleneck_channels();
    bottleneck_ = std::make_unique<Bottleneck>(cb + (middle ? 3 : 0), cb, cfg_.bn_momentum);

    dec_.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        const int below = (i == d - 1) ? cb : cfg_.stage_channels(i + 1);
        const int out = cfg_.stage_channels(i);
        const int concat_in = skips_ ? 2 * out : out;
        dec_.emplace_back(below, out, concat_in, cfg_.bn_momentum);
        if (fusion_.mechanism == Mechanism::film && *fusion_.site == FusionSite::decoder)
            dec_.back().film = std::make_unique<FilmLayer>(out);
    }

    if (fusion_.mechanism == Mechanism::film && *fusion_.site == FusionSite::late)
        late_film_ = std::make_unique<FilmLayer>(cfg_.stage_channels(0));

    final_ = std::make_unique<Conv2d>(cfg_.stage_channels(0) + (late_concat ? 3 : 0),
                                      cfg_.num_classes, 1, 0);
}

void SegmentationModel::register_params() {
    params_.clear();
    buffers_.clear();
    if (embed_) embed_->collect("embed", params_);
    for (size_t i = 0; i < enc_.size(); ++i) {
        const std::string p = "enc." + std::to_string(i);
        enc_[i].conv1.collect(p + ".conv1", params_);
        enc_[i].bn1.collect(p + ".bn1", params_);
        enc_[i].conv2.collect(p + ".conv2", params_);
        enc_[i].bn2.collect(p + ".bn2", params_);
        enc_[i].bn1.collect_buffers(p + ".bn1", buffers_);
        enc_[i].bn2.collect_buffers(p + ".bn2", buffers_);
    }
    bottleneck_->conv1.collect("bottleneck.conv1", params_);
    bottleneck_->bn1.collect("bottleneck.bn1", params_);
    bottleneck_->conv2.collect("bottleneck.conv2", params_);
    bottleneck_->bn2.collect("bottleneck.bn2", params_);
    bottleneck_->bn1.collect_buffers("bottleneck.bn1", buffers_);
    bottleneck_->bn2.collect_buffers("bottleneck.bn2", buffers_);
    for (size_t i = 0; i < dec_.size(); ++i) {
        const std::string p = "dec." + std::to_string(i);
        dec_[i].upconv.collect(p + ".upconv", params_);
        dec_[i].upbn.collect(p + ".upbn", params_);
        dec_[i].conv1.collect(p + ".conv1", params_);
        dec_[i].bn1.collect(p + ".bn1", params_);
        dec_[i].conv2.collect(p + ".conv2", params_);
        dec_[i].bn2.collect(p + ".bn2", params_);
        if (dec_[i].film) dec_[i].film->collect(p + ".film", params_);
        dec_[i].upbn.collect_buffers(p + ".upbn", buffers_);
        dec_[i].bn1.collect_buffers(p + ".bn1", buffers_);
        dec_[i].bn2.collect_buffers(p + ".bn2", buffers_);
    }
    if (late_film_) late_film_->collect("late_film", params_);
    final_->collect("final", params_);
}

void SegmentationModel::init_all_params() {
    for (Param* p : params_) init_param(*p, seed_);
}

long SegmentationModel::count_parameters() const {
    long n = 0;
    for (const Param* p : params_) n += p->value.numel();
    return n;
}

void SegmentationModel::zero_grad() {
    for (Param* p : params_) p->grad.zero();
}

Tensor SegmentationModel::forward(const Tensor& images, const Tensor& z, bool train) {
    if (images.ndim() != 4 || images.dim(1) != cfg_.in_channels)
        throw ShapeError("model: expected images [N," + std::to_string(cfg_.in_channels) +
                         ",H,W], got " + images.shape_string());
    const int n = images.dim(0), h = images.dim(2), w = images.dim(3);
    const int div = 1 << cfg_.depth;
    if (h % div != 0 || w % div != 0)
        throw ShapeError("model: input dims must be divisible by 2^depth = " + std::to_string(div));

    const bool uses_z = fusion_.mechanism != Mechanism::none;
    if (uses_z && (z.ndim() != 2 || z.dim(0) != n || z.dim(1) != 3))
        throw ShapeError("model: expected z [N,3], got " + z.shape_string());

    const bool is_concat =
        fusion_.mechanism == Mechanism::concat_raw || fusion_.mechanism == Mechanism::concat_mlp;
    Tensor ztilde;
    used_embed_ = false;
    if (is_concat) {
        if (fusion_.mechanism == Mechanism::concat_mlp) {
            ztilde = embed_->forward(z, train);
            used_embed_ = true;
        } else {
            ztilde = z;
        }
    }

    Tensor x = images;
    if (is_concat && *fusion_.site == FusionSite::early) {
        replicate_h_ = h;
        replicate_w_ = w;
        x = concat_channels(x, replicate_spatial(ztilde, h, w));
    }

    std::vector<Tensor> skips;
    skips.reserve(enc_.size());
    for (auto& st : enc_) {
        Tensor t = st.conv1.forward(x, train);
        t = st.bn1.forward(t, train);
        t = st.r1.forward(t, train);
        t = st.conv2.forward(t, train);
        t = st.bn2.forward(t, train);
        t = st.r2.forward(t, train);
        if (skips_) skips.push_back(t);
        x = st.pool.forward(t, train);
    }

    if (is_concat && *fusion_.site == FusionSite::middle) {
        replicate_h_ = x.dim(2);
        replicate_w_ = x.dim(3);
        x = concat_channels(x, replicate_spatial(ztilde, x.dim(2), x.dim(3)));
    }
    x = bottleneck_->conv1.forward(x, train);
    x = bottleneck_->bn1.forward(x, train);
    x = bottleneck_->r1.forward(x, train);
    x = bottleneck_->conv2.forward(x, train);
    x = bottleneck_->bn2.forward(x, train);
    x = bottleneck_->r2.forward(x, train);

    for (int i = cfg_.depth - 1; i >= 0; --i) {
        auto& st = dec_[static_cast<size_t>(i)];
        Tensor u = st.up.forward(x, train);
        u = st.upconv.forward(u, train);
        u = st.upbn.forward(u, train);
        u = st.upr.forward(u, train);
        Tensor hin = skips_ ? concat_channels(u, skips[static_cast<size_t>(i)]) : std::move(u);
        Tensor t = st.conv1.forward(hin, train);
        t = st.bn1.forward(t, train);
        t = st.r1.forward(t, train);
        t = st.conv2.forward(t, train);
        t = st.bn2.forward(t, train);
        if (st.film) t = st.film->forward(t, z, train);
        x = st.r2.forward(t, train);
    }

    if (is_concat && *fusion_.site == FusionSite::late) {
        replicate_h_ = x.dim(2);
        replicate_w_ = x.dim(3);
        x = concat_channels(x, replicate_spatial(ztilde, x.dim(2), x.dim(3)));
    } else if (late_film_) {
        x = late_film_->forward(x, z, train);
    }
    return final_->forward(x, train);
}

void SegmentationModel::backward(const Tensor& dlogits) {
    const bool is_concat =
        fusion_.mechanism == Mechanism::concat_raw || fusion_.mechanism == Mechanism::concat_mlp;

    Tensor g = final_->backward(dlogits);
    Tensor g_ztilde;
    bool have_gz = false;

    if (is_concat && *fusion_.site == FusionSite::late) {
        Tensor gfeat, gz;
        split_channels(g, cfg_.stage_channels(0), gfeat, gz);
        g_ztilde = replicate_spatial_backward(gz);
        have_gz = true;
        g = std::move(gfeat);
    } else if (late_film_) {
        g = late_film_->backward(g);
    }

    // Decoder stages were applied deepest-last in forward order i = D-1..0,
    // so backward visits i = 0..D-1. Skip gradients are replayed into the
    // encoder loop below.
    std::vector<Tensor> gskips(dec_.size());
    for (size_t i = 0; i < dec_.size(); ++i) {
        auto& st = dec_[i];
        g = st.r2.backward(g);
        if (st.film) g = st.film->backward(g);
        g = st.bn2.backward(g);
        g = st.conv2.backward(g);
        g = st.r1.backward(g);
        g = st.bn1.backward(g);
        g = st.conv1.backward(g);
        Tensor gu;
        if (skips_) {
            Tensor gs;
            split_channels(g, cfg_.stage_channels(static_cast<int>(i)), gu, gs);
            gskips[i] = std::move(gs);
        } else {
            gu = std::move(g);
        }
        gu = st.upr.backward(gu);
        gu = st.upbn.backward(gu);
        gu = st.upconv.backward(gu);
        g = st.up.backward(gu);
    }

    g = bottleneck_->r2.backward(g);
    g = bottleneck_->bn2.backward(g);
    g = bottleneck_->conv2.backward(g);
    g = bottleneck_->r1.backward(g);
    g = bottleneck_->bn1.backward(g);
    g = bottleneck_->conv1.backward(g);

    if (is_concat && *fusion_.site == FusionSite::middle) {
        Tensor gfeat, gz;
        split_channels(g, cfg_.bottleneck_channels(), gfeat, gz);
        g_ztilde = replicate_spatial_backward(gz);
        have_gz = true;
        g = std::move(gfeat);
    }

    for (size_t i = enc_.size(); i-- > 0;) {
        auto& st = enc_[i];
        g = st.pool.backward(g);
        if (skips_) {
            const Tensor& gs = gskips[i];
            float* gd = g.data();
            const float* sd = gs.data();
            for (long p = 0; p < g.numel(); ++p) gd[p] += sd[p];
        }
        g = st.r2.backward(g);
        g = st.bn2.backward(g);
        g = st.conv2.backward(g);
        g = st.r1.backward(g);
        g = st.bn1.backward(g);
        g = st.conv1.backward(g);
    }

    if (is_concat && *fusion_.site == FusionSite::early) {
        Tensor gimg, gz;
        split_channels(g, cfg_.in_channels, gimg, gz);
        g_ztilde = replicate_spatial_backward(gz);
        have_gz = true;
    }

    if (have_gz && used_embed_) embed_->backward(g_ztilde);
    // concat_raw: gradient w.r.t. the raw conditioning input is discarded.
}

// ---------------------------------------------------------------------------
// Weight-map IO and state snapshots
// ---------------------------------------------------------------------------

namespace {
constexpr char kWeightsMagic[8] = {'C', 'S', 'W', 'T', '1', 0, 0, 0};

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

void write_entry(std::ostream& os, const std::string& name, const Tensor& t) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) write_u32(os, static_cast<uint32_t>(t.dim(i)));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(t.numel())));
}
}  // namespace

void SegmentationModel::save_weights(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write weights: " + path);
    os.write(kWeightsMagic, 8);
    write_u32(os, static_cast<uint32_t>(params_.size() + buffers_.size()));
    for (const Param* p : params_) write_entry(os, p->name, p->value);
    for (const Buffer* b : buffers_) write_entry(os, b->name, b->value);
    if (!os) throw IoError("write failed: " + path);
}

void SegmentationModel::load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read weights: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kWeightsMagic, 8) != 0)
        throw IoError("bad weights file: " + path);
    const uint32_t count = read_u32(is);
    for (uint32_t k = 0; k < count; ++k) {
        const uint32_t len = read_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const uint32_t nd = read_u32(is);
        std::vector<int> dims(nd);
        long numel = 1;
        for (uint32_t i = 0; i < nd; ++i) {
            dims[i] = static_cast<int>(read_u32(is));
            numel *= dims[i];
        }
        Tensor* dst = nullptr;
        for (Param* p : params_)
            if (p->name == name) dst = &p->value;
        if (!dst)
            for (Buffer* b : buffers_)
                if (b->name == name) dst = &b->value;
        if (!dst) throw IoError("weights entry '" + name + "' does not exist in this model");
        if (dst->dims() != dims)
            throw ShapeError("weights entry '" + name + "' has mismatching shape");
        is.read(reinterpret_cast<char*>(dst->data()),
                static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(numel)));
        if (!is) throw IoError("truncated weights file: " + path);
    }
}

std::vector<float> SegmentationModel::snapshot_state() const {
    std::vector<float> out;
    for (const Param* p : params_) out.insert(out.end(), p->value.data(), p->value.data() + p->value.numel());
    for (const Buffer* b : buffers_)
        out.insert(out.end(), b->value.data(), b->value.data() + b->value.numel());
    return out;
}

void SegmentationModel::restore_state(const std::vector<float>& state) {
    size_t off = 0;
    for (Param* p : params_) {
        std::memcpy(p->value.data(), state.data() + off,
                    sizeof(float) * static_cast<size_t>(p->value.numel()));
        off += static_cast<size_t>(p->value.numel());
    }
    for (Buffer* b : buffers_) {
        std::memcpy(b->value.data(), state.data() + off,
                    sizeof(float) * static_cast<size_t>(b->value.numel()));
        off += static_cast<size_t>(b->value.numel());
    }
    if (off != state.size()) throw InputError("restore_state: size mismatch");
}

Param* SegmentationModel::find_param(const std::string& name) {
    for (Param* p : params_)
        if (p->name == name) return p;
    return nullptr;
}

void SegmentationModel::copy_matching_params_from(SegmentationModel& other) {
    for (Param* p : params_) {
        Param* src = other.find_param(p->name);
        if (src && src->value.dims() == p->value.dims())
            std::memcpy(p->value.data(), src->value.data(),
                        sizeof(float) * static_cast<size_t>(p->value.numel()));
    }
    for (Buffer* b : buffers_)
        for (Buffer* sb : other.buffers_)
            if (sb->name == b->name && sb->value.dims() == b->value.dims())
                std::memcpy(b->value.data(), sb->value.data(),
                            sizeof(float) * static_cast<size_t>(b->value.numel()));
}

void SegmentationModel::randomize_parameters(uint64_t seed) {
    for (Param* p : params_) {
        Rng rng(hash_u64(seed, p->name));
        for (long i = 0; i < p->value.numel(); ++i)
            p->value[i] = static_cast<float>(rng.normal(0.0, 0.5));
    }
}

// ---------------------------------------------------------------------------
// Prediction helpers
// ---------------------------------------------------------------------------

void argmax_labels(const Tensor& logits, int sample, Mask2D& out) {
    const int c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    out = Mask2D(h, w);
    const long hw = static_cast<long>(h) * w;
    const float* base = logits.data() + logits.idx4(sample, 0, 0, 0);
    for (long p = 0; p < hw; ++p) {
        int best = 0;
        float bv = base[p];
        for (int ch = 1; ch < c; ++ch) {
            const float v = base[static_cast<long>(ch) * hw + p];
            if (v > bv) {  // strict: ties keep the lowest class index
                bv = v;
                best = ch;
            }
        }
        out.v[static_cast<size_t>(p)] = static_cast<uint8_t>(best);
    }
}

MaskVolume3D forward_volume(SegmentationModel& model, const std::vector<SliceSample>& slices,
                            int batch_size) {
    if (slices.empty()) throw InputError("forward_volume: empty slice list");
    for (const auto& s : slices) {
        if (s.subject_id != slices[0].subject_id || s.phase != slices[0].phase)
            throw InputError("forward_volume: slices from mixed subjects/phases");
    }
    for (size_t i = 1; i < slices.size(); ++i)
        if (slices[i].slice_index <= slices[i - 1].slice_index)
            throw InputError("forward_volume: slices must be ordered by slice_index");

    const int h = slices[0].image.h, w = slices[0].image.w;
    MaskVolume3D vol(static_cast<int>(slices.size()), h, w);
    for (size_t start = 0; start < slices.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(slices.size(), start + static_cast<size_t>(batch_size));
        const int n = static_cast<int>(end - start);
        Tensor images({n, 1, h, w});
        Tensor z({n, 3});
        for (int i = 0; i < n; ++i) {
            const auto& s = slices[start + static_cast<size_t>(i)];
            std::memcpy(images.data() + images.idx4(i, 0, 0, 0), s.image.v.data(),
                        sizeof(float) * s.image.v.size());
            z.at2(i, 0) = static_cast<float>(s.z.rv);
            z.at2(i, 1) = static_cast<float>(s.z.myo);
            z.at2(i, 2) = static_cast<float>(s.z.lv);
        }
        Tensor logits = model.forward(images, z, false);
        for (int i = 0; i < n; ++i) {
            Mask2D m;
            argmax_labels(logits, i, m);
            std::memcpy(vol.v.data() + (start + static_cast<size_t>(i)) * m.v.size(), m.v.data(),
                        m.v.size());
        }
    }
    return vol;
}

// ---------------------------------------------------------------------------
// Checkpoint metadata sidecar
// ---------------------------------------------------------------------------

void write_checkpoint_meta(const std::string& path, const CheckpointMeta& meta) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write checkpoint meta: " + path);
    os << "architecture = " << meta.architecture << "\n"
       << "variant = " << meta.variant << "\n"
       << "depth = " << meta.depth << "\n"
       << "base_channels = " << meta.base_channels << "\n"
       << "seed = " << meta.seed << "\n"
       << "epoch = " << meta.epoch << "\n";
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read checkpoint meta: " + path);
    CheckpointMeta meta;
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "architecture") meta.architecture = val;
        else if (key == "variant") meta.variant = val;
        else if (key == "depth") meta.depth = std::stoi(val);
        else if (key == "base_channels") meta.base_channels = std::stoi(val);
        else if (key == "seed") meta.seed = std::stoull(val);
        else if (key == "epoch") meta.epoch = std::stoi(val);
    }
    return meta;
}

}  // namespace condseg
