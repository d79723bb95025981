#include "condseg/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "condseg/error.hpp"
#include "condseg/nifti.hpp"
#include "condseg/rng.hpp"

namespace condseg {

namespace {

struct PhantomShape {
    double cx, cy;        // shared center of the disc/ring
    double r_lv;          // LV cavity radius at the basal (widest) slice
    double thickness;     // myocardial ring thickness
    double rv_a, rv_b;    // RV ellipse semi-axes
    double level_bg, level_myo, level_cavity;
};

PhantomShape draw_shape(Rng& rng, int h, int w) {
    PhantomShape s;
    s.cx = w / 2.0 + rng.uniform(-20.0, 20.0);
    s.cy = h / 2.0 + rng.uniform(-20.0, 20.0);
    s.r_lv = rng.uniform(10.0, 34.0);
    s.thickness = rng.uniform(5.0, 14.0);
    s.rv_a = rng.uniform(8.0, 26.0);
    s.rv_b = s.rv_a * rng.uniform(0.7, 1.3);
    // Per-volume contrast jitter keeps absolute intensity from pinning sizes.
    const double scale = rng.uniform(0.8, 1.2);
    const double offset = rng.uniform(-0.1, 0.1);
    s.level_bg = 0.20 * scale + offset;
    s.level_myo = 0.45 * scale + offset;
    s.level_cavity = 0.85 * scale + offset;
    return s;
}

void gaussian_blur_inplace(std::vector<float>& img, int h, int w, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[static_cast<size_t>(i + radius)];
    }
    for (double& k : kernel) k /= sum;

    std::vector<float> tmp(img.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                acc += kernel[static_cast<size_t>(i + radius)] *
                       img[static_cast<size_t>(y) * w + xx];
            }
            tmp[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                acc += kernel[static_cast<size_t>(i + radius)] *
                       tmp[static_cast<size_t>(yy) * w + x];
            }
            img[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
        }
}

}  // namespace

std::string synthetic_subject_id(int subject_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "patient%03d", subject_index + 1);
    return buf;
}

VolumeSample generate_synthetic_volume(const SyntheticConfig& cfg, int subject_index, Phase phase) {
    if (cfg.n_subjects < 3) throw InputError("synthetic: need at least 3 subjects");
    const int h = cfg.height, w = cfg.width, ns = cfg.slices_per_volume;

    const uint64_t subject_seed = hash_u64(hash_u64(cfg.seed, "subject"),
                                           static_cast<uint64_t>(subject_index));
    Rng shape_rng(hash_u64(subject_seed, "shape"));
    PhantomShape shape = draw_shape(shape_rng, h, w);
    // ES: contracted heart, same shape family.
    const double phase_scale = (phase == Phase::ES) ? 0.78 : 1.0;

    VolumeSample out;
    out.subject_id = synthetic_subject_id(subject_index);
    out.phase = phase;
    out.spacing_x = cfg.spacing;
    out.spacing_y = cfg.spacing;
    out.slice_spacing = cfg.slice_spacing;
    out.image = Volume3D(ns, h, w);
    out.labels = MaskVolume3D(ns, h, w);

    for (int s = 0; s < ns; ++s) {
        Rng slice_rng(hash_u64(hash_u64(subject_seed, phase == Phase::ED ? "ED" : "ES"),
                               static_cast<uint64_t>(s)));
        // apex-to-base taper plus per-slice jitter
        const double taper =
            ns > 1 ? 0.60 + 0.45 * static_cast<double>(s) / (ns - 1) : 1.0;
        const double f = phase_scale * std::max(0.3, taper + slice_rng.normal(0.0, 0.03));
        const double r_in = shape.r_lv * f;
        const double r_out = (shape.r_lv + shape.thickness) * f;
        const double rv_a = shape.rv_a * f;
        const double rv_b = shape.rv_b * f;
        const double rv_cx = shape.cx - r_out - 0.8 * rv_a;
        const double rv_cy = shape.cy;

        std::vector<float> levels(static_cast<size_t>(h) * w,
                                  static_cast<float>(shape.level_bg));
        uint8_t* lab = out.labels.v.data() + static_cast<size_t>(s) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double d = std::hypot(x - shape.cx, y - shape.cy);
                uint8_t l = 0;
                if (d < r_in)
                    l = 3;
                else if (d < r_out)
                    l = 2;
                else {
                    const double ex = (x - rv_cx) / rv_a;
                    const double ey = (y - rv_cy) / rv_b;
                    if (ex * ex + ey * ey < 1.0) l = 1;
                }
                lab[static_cast<size_t>(y) * w + x] = l;
                if (l == 2)
                    levels[static_cast<size_t>(y) * w + x] = static_cast<float>(shape.level_myo);
                else if (l == 1 || l == 3)
                    levels[static_cast<size_t>(y) * w + x] = static_cast<float>(shape.level_cavity);
            }

        gaussian_blur_inplace(levels, h, w, cfg.blur_sigma);
        Rng noise_rng(hash_u64(slice_rng.next_u64(), "noise"));
        float* img = out.image.v.data() + static_cast<size_t>(s) * h * w;
        for (long p = 0; p < static_cast<long>(h) * w; ++p)
            img[p] = levels[static_cast<size_t>(p)] +
                     static_cast<float>(noise_rng.normal(0.0, cfg.noise_sigma));
    }
    return out;
}

std::vector<VolumeSample> generate_synthetic_dataset(const SyntheticConfig& cfg) {
    std::vector<VolumeSample> out;
    out.reserve(static_cast<size_t>(cfg.n_subjects) * 2);
    for (int i = 0; i < cfg.n_subjects; ++i) {
        out.push_back(generate_synthetic_volume(cfg, i, Phase::ED));
        out.push_back(generate_synthetic_volume(cfg, i, Phase::ES));
    }
    return out;
}

void write_synthetic_dataset(const std::string& root, const SyntheticConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(root);
    for (int i = 0; i < cfg.n_subjects; ++i) {
        const std::string sid = synthetic_subject_id(i);
        const fs::path dir = fs::path(root) / sid;
        fs::create_directories(dir);
        {
            std::ofstream info(dir / "Info.cfg");
            if (!info) throw IoError("cannot write Info.cfg under " + dir.string());
            info << "ED: 1\nES: 2\n";
        }
        for (Phase phase : {Phase::ED, Phase::ES}) {
            const VolumeSample v = generate_synthetic_volume(cfg, i, phase);
            const int frame = phase == Phase::ED ? 1 : 2;
            char suffix[32];
            std::snprintf(suffix, sizeof(suffix), "_frame%02d", frame);

            NiftiVolume img;
            img.nx = v.image.w;
            img.ny = v.image.h;
            img.nz = v.image.ns;
            img.dx = v.spacing_x;
            img.dy = v.spacing_y;
            img.dz = v.slice_spacing;
            img.data.assign(v.image.v.begin(), v.image.v.end());
            write_nifti((dir / (sid + suffix + ".nii.gz")).string(), img, false);

            NiftiVolume gt = img;
            gt.data.assign(v.labels.v.begin(), v.labels.v.end());
            write_nifti((dir / (sid + suffix + "_gt.nii.gz")).string(), gt, true);
        }
    }
}

}  // namespace condseg
