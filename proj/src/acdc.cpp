#include "condseg/acdc.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "condseg/error.hpp"
#include "condseg/nifti.hpp"

namespace fs = std::filesystem;

namespace condseg {

AcdcFrameInfo read_info_cfg(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read subject metadata: " + path);
    AcdcFrameInfo info;
    bool have_ed = false, have_es = false;
    std::string line;
    while (std::getline(is, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        if (key == "ED") {
            info.ed = std::stoi(line.substr(colon + 1));
            have_ed = true;
        } else if (key == "ES") {
            info.es = std::stoi(line.substr(colon + 1));
            have_es = true;
        }
    }
    if (!have_ed || !have_es) throw IoError("Info.cfg lacks ED/ES frame numbers: " + path);
    return info;
}

namespace {

std::string frame_path(const fs::path& dir, const std::string& subject, int frame,
                       const std::string& suffix) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_frame%02d", frame);
    for (const char* ext : {".nii.gz", ".nii"}) {
        fs::path p = dir / (subject + buf + suffix + ext);
        if (fs::exists(p)) return p.string();
    }
    return (dir / (subject + buf + suffix + ".nii.gz")).string();  // canonical name for messages
}

VolumeSample load_frame(const fs::path& dir, const std::string& subject, Phase phase, int frame,
                        const LabelMap& lm) {
    const std::string img_path = frame_path(dir, subject, frame, "");
    if (!fs::exists(img_path))
        throw IoError("image volume missing: " + img_path);
    const std::string gt_path = frame_path(dir, subject, frame, "_gt");
    if (!fs::exists(gt_path))
        throw AnnotationMissingError("annotation missing for " + subject + " " +
                                     phase_name(phase) + ": " + gt_path);

    const NiftiVolume img = read_nifti(img_path);
    const NiftiVolume gt = read_nifti(gt_path);
    if (img.nx != gt.nx || img.ny != gt.ny || img.nz != gt.nz)
        throw ShapeError("image/label dims differ for " + subject + " frame " +
                         std::to_string(frame));
    if (!(img.dx > 0.0 && img.dy > 0.0 && img.dz > 0.0))
        throw InputError("non-positive voxel spacing in " + img_path);

    VolumeSample v;
    v.subject_id = subject;
    v.phase = phase;
    v.spacing_x = img.dx;
    v.spacing_y = img.dy;
    v.slice_spacing = img.dz;
    v.image = Volume3D(img.nz, img.ny, img.nx);
    v.labels = MaskVolume3D(img.nz, img.ny, img.nx);
    std::copy(img.data.begin(), img.data.end(), v.image.v.begin());

    for (size_t i = 0; i < gt.data.size(); ++i) {
        const long raw = std::lround(gt.data[i]);
        uint8_t mapped;
        if (raw == lm.background)
            mapped = 0;
        else if (raw == lm.rv)
            mapped = 1;
        else if (raw == lm.myo)
            mapped = 2;
        else if (raw == lm.lv)
            mapped = 3;
        else
            throw CorruptLabelsError("corrupt labels in " + gt_path + ": value " +
                                     std::to_string(raw) + " outside the label map");
        v.labels.v[i] = mapped;
    }
    return v;
}

}  // namespace

std::vector<VolumeSample> load_acdc_subject(const std::string& dir_path, const LabelMap& lm) {
    const fs::path dir(dir_path);
    if (!fs::is_directory(dir)) throw IoError("not a subject directory: " + dir_path);
    const std::string subject = dir.filename().string();
    const AcdcFrameInfo info = read_info_cfg((dir / "Info.cfg").string());

    std::vector<VolumeSample> out;
    out.push_back(load_frame(dir, subject, Phase::ED, info.ed, lm));
    out.push_back(load_frame(dir, subject, Phase::ES, info.es, lm));
    for (auto& v : out) v.validate();
    return out;
}

std::vector<std::string> list_subject_dirs(const std::string& root) {
    if (!fs::is_directory(root)) throw IoError("dataset root not found: " + root);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(root)) {
        if (!e.is_directory()) continue;
        const std::string name = e.path().filename().string();
        if (name.rfind("patient", 0) == 0) names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace condseg
