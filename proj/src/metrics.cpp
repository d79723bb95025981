#include "condseg/metrics.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "condseg/error.hpp"
#include "condseg/stats.hpp"

namespace condseg {

double dice_score(const MaskVolume3D& pred, const MaskVolume3D& gt, int class_id) {
    if (pred.ns != gt.ns || pred.h != gt.h || pred.w != gt.w)
        throw ShapeError("dice_score: volume dimensions differ");
    long np = 0, ng = 0, ni = 0;
    const size_t n = pred.v.size();
    for (size_t i = 0; i < n; ++i) {
        const bool p = pred.v[i] == class_id;
        const bool g = gt.v[i] == class_id;
        np += p;
        ng += g;
        ni += p && g;
    }
    if (np + ng == 0) return 1.0;  // both empty
    return 2.0 * static_cast<double>(ni) / static_cast<double>(np + ng);
}

DiceRecord make_dice_record(const std::string& subject, Phase phase, const MaskVolume3D& pred,
                            const MaskVolume3D& gt) {
    DiceRecord r;
    r.subject = subject;
    r.phase = phase;
    r.rv = dice_score(pred, gt, 1);
    r.myo = dice_score(pred, gt, 2);
    r.lv = dice_score(pred, gt, 3);
    r.mean_dice = (r.rv + r.myo + r.lv) / 3.0;
    return r;
}

MaskVolume3D stack_labels(const std::vector<SliceSample>& slices) {
    if (slices.empty()) throw InputError("stack_labels: empty slice list");
    const int h = slices[0].labels.h, w = slices[0].labels.w;
    MaskVolume3D vol(static_cast<int>(slices.size()), h, w);
    for (size_t s = 0; s < slices.size(); ++s)
        std::memcpy(vol.v.data() + s * slices[s].labels.v.size(), slices[s].labels.v.data(),
                    slices[s].labels.v.size());
    return vol;
}

std::vector<DiceRecord> evaluate_model(SegmentationModel& model,
                                       const std::vector<std::vector<SliceSample>>& volumes,
                                       int batch_size) {
    std::vector<DiceRecord> out;
    out.reserve(volumes.size());
    for (const auto& slices : volumes) {
        const MaskVolume3D pred = forward_volume(model, slices, batch_size);
        const MaskVolume3D gt = stack_labels(slices);
        out.push_back(make_dice_record(slices[0].subject_id, slices[0].phase, pred, gt));
    }
    return out;
}

std::pair<double, double> aggregate(const std::vector<DiceRecord>& records) {
    if (records.empty()) throw InputError("aggregate: no records");
    std::vector<double> means;
    means.reserve(records.size());
    for (const auto& r : records) means.push_back(r.mean_dice);
    return mean_and_sample_std(means);
}

void write_dice_records(const std::string& path, const std::vector<DiceRecord>& records) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write dice records: " + path);
    os << "subject,phase,dice_rv,dice_myo,dice_lv,mean_dice\n";
    char buf[160];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g,%.17g", r.subject.c_str(),
                      phase_name(r.phase), r.rv, r.myo, r.lv, r.mean_dice);
        os << buf << "\n";
    }
}

std::vector<DiceRecord> read_dice_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read dice records: " + path);
    std::vector<DiceRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line.rfind("subject,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string field;
        DiceRecord r;
        std::getline(ss, r.subject, ',');
        std::getline(ss, field, ',');
        r.phase = phase_from_string(field);
        std::getline(ss, field, ',');
        r.rv = std::stod(field);
        std::getline(ss, field, ',');
        r.myo = std::stod(field);
        std::getline(ss, field, ',');
        r.lv = std::stod(field);
        std::getline(ss, field, ',');
        r.mean_dice = std::stod(field);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace condseg
