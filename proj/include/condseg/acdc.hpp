#pragma once

#include <string>
#include <vector>

#include "condseg/types.hpp"

namespace condseg {

// ACDC label semantics (dataset convention): 0 = background, 1 = RV cavity,
// 2 = myocardium, 3 = LV cavity. Remappable for datasets that disagree.
struct LabelMap {
    int background = 0;
    int rv = 1;
    int myo = 2;
    int lv = 3;
};

struct AcdcFrameInfo {
    int ed = 0;
    int es = 0;
};

// Parses the `ED:` / `ES:` frame numbers from a subject's Info.cfg.
AcdcFrameInfo read_info_cfg(const std::string& path);

// Loads the two annotated frames (ED, ES) of one patient directory:
// patientXXX/{Info.cfg, patientXXX_frameTT.nii.gz, patientXXX_frameTT_gt.nii.gz}.
// Missing ground truth raises AnnotationMissingError; labels outside the map
// raise CorruptLabelsError.
std::vector<VolumeSample> load_acdc_subject(const std::string& dir_path, const LabelMap& lm = {});

// Sorted subject directory names under a dataset root ("patient*").
std::vector<std::string> list_subject_dirs(const std::string& root);

}  // namespace condseg
