#include "condseg/cache.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "condseg/error.hpp"
#include "condseg/rng.hpp"

namespace fs = std::filesystem;

namespace condseg {

namespace {

constexpr char kSliceMagic[8] = {'C', 'S', 'S', 'L', '1', 0, 0, 0};
constexpr const char* kManifestName = "manifest.csv";

uint64_t hash_bytes(uint64_t h, const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t hash_file_contents(uint64_t h, const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot read " + p.string());
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof(buf));
        h = hash_bytes(h, buf, static_cast<size_t>(is.gcount()));
    }
    return h;
}

std::string slice_file_name(const std::string& subject, Phase phase, int idx) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%s_%03d.bin", subject.c_str(), phase_name(phase), idx);
    return std::string("slices/") + buf;
}

void write_slice_file(const fs::path& path, const SliceSample& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write slice file: " + path.string());
    os.write(kSliceMagic, 8);
    auto w_u32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto w_f64 = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    w_u32(static_cast<uint32_t>(s.subject_id.size()));
    os.write(s.subject_id.data(), static_cast<std::streamsize>(s.subject_id.size()));
    w_u32(s.phase == Phase::ED ? 0u : 1u);
    w_u32(static_cast<uint32_t>(s.slice_index));
    w_u32(static_cast<uint32_t>(s.image.h));
    w_u32(static_cast<uint32_t>(s.image.w));
    os.write(reinterpret_cast<const char*>(s.image.v.data()),
             static_cast<std::streamsize>(s.image.v.size() * 4));
    os.write(reinterpret_cast<const char*>(s.labels.v.data()),
             static_cast<std::streamsize>(s.labels.v.size()));
    w_f64(s.z.rv);
    w_f64(s.z.myo);
    w_f64(s.z.lv);
    if (!os) throw IoError("failed writing slice file: " + path.string());
}

}  // namespace

SliceSample load_slice(const std::string& cache_dir, const ManifestRecord& rec) {
    const fs::path path = fs::path(cache_dir) / rec.file;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read slice file: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kSliceMagic, 8) != 0)
        throw IoError("bad slice file: " + path.string());
    auto r_u32 = [&]() {
        uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto r_f64 = [&]() {
        double v = 0;
        is.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    SliceSample s;
    const uint32_t slen = r_u32();
    s.subject_id.resize(slen);
    is.read(s.subject_id.data(), slen);
    s.phase = r_u32() == 0 ? Phase::ED : Phase::ES;
    s.slice_index = static_cast<int>(r_u32());
    const int h = static_cast<int>(r_u32());
    const int w = static_cast<int>(r_u32());
    s.image = Grid2D(h, w);
    s.labels = Mask2D(h, w);
    is.read(reinterpret_cast<char*>(s.image.v.data()),
            static_cast<std::streamsize>(s.image.v.size() * 4));
    is.read(reinterpret_cast<char*>(s.labels.v.data()),
            static_cast<std::streamsize>(s.labels.v.size()));
    s.z.rv = r_f64();
    s.z.myo = r_f64();
    s.z.lv = r_f64();
    if (!is) throw IoError("truncated slice file: " + path.string());
    return s;
}

uint64_t dataset_fingerprint(const std::string& dataset_root, const PrepareOptions& opts) {
    uint64_t h = 1469598103934665603ULL;
    const auto subjects = list_subject_dirs(dataset_root);
    for (const auto& name : subjects) {
        h = hash_bytes(h, name.data(), name.size());
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(fs::path(dataset_root) / name))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const std::string fn = f.filename().string();
            h = hash_bytes(h, fn.data(), fn.size());
            h = hash_file_contents(h, f);
        }
    }
    const auto& p = opts.preprocess;
    h = hash_bytes(h, &p.target_spacing, sizeof p.target_spacing);
    h = hash_bytes(h, &p.out_height, sizeof p.out_height);
    h = hash_bytes(h, &p.out_width, sizeof p.out_width);
    h = hash_bytes(h, &p.clip_sigma, sizeof p.clip_sigma);
    h = hash_bytes(h, &p.per_volume_z, sizeof p.per_volume_z);
    h = hash_bytes(h, &opts.labels, sizeof opts.labels);
    return h;
}

PrepareResult prepare_data(const std::string& dataset_root, const std::string& cache_dir,
                           const PrepareOptions& opts, std::ostream* log) {
    PrepareResult result;
    const auto subjects = list_subject_dirs(dataset_root);
    if (subjects.empty()) throw InputError("no subjects found under " + dataset_root);

    const uint64_t fingerprint = dataset_fingerprint(dataset_root, opts);
    const fs::path manifest_path = fs::path(cache_dir) / kManifestName;
    if (fs::exists(manifest_path)) {
        std::ifstream is(manifest_path);
        std::string line;
        while (std::getline(is, line)) {
            if (line.rfind("# fingerprint=", 0) == 0) {
                if (std::stoull(line.substr(14), nullptr, 16) == fingerprint) {
                    result.skipped = true;
                    const auto manifest = read_manifest(cache_dir);
                    result.slices = static_cast<int>(manifest.size());
                    if (log) *log << "cache up to date, skipping preprocessing\n";
                    return result;
                }
                break;
            }
            if (!line.empty() && line[0] != '#') break;
        }
    }

    fs::create_directories(fs::path(cache_dir) / "slices");
    std::vector<ManifestRecord> records;
    for (const auto& name : subjects) {
        try {
            const auto volumes = load_acdc_subject((fs::path(dataset_root) / name).string(),
                                                   opts.labels);
            for (const auto& raw : volumes) {
                const VolumeSample pre = preprocess_volume(raw, opts.preprocess);
                const auto slices = extract_slices(pre, opts.preprocess.per_volume_z);
                for (const auto& s : slices) {
                    ManifestRecord rec;
                    rec.subject = s.subject_id;
                    rec.phase = s.phase;
                    rec.slice_index = s.slice_index;
                    rec.z = s.z;
                    rec.file = slice_file_name(s.subject_id, s.phase, s.slice_index);
                    write_slice_file(fs::path(cache_dir) / rec.file, s);
                    records.push_back(std::move(rec));
                }
                ++result.volumes;
            }
        } catch (const std::exception& e) {
            result.subject_errors.push_back(name + ": " + e.what());
            if (log) *log << "error: subject " << name << ": " << e.what() << "\n";
        }
    }
    if (records.empty()) throw InputError("preprocessing produced no usable volumes");
    result.slices = static_cast<int>(records.size());

    // write manifest atomically so an interrupted run never looks complete
    const fs::path tmp = manifest_path.string() + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot write manifest: " + tmp.string());
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fingerprint));
        os << "# condseg cache v1\n# fingerprint=" << buf << "\n";
        os << "subject,phase,slice,z_rv,z_myo,z_lv,file\n";
        for (const auto& r : records) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", r.z.rv, r.z.myo, r.z.lv);
            os << r.subject << "," << phase_name(r.phase) << "," << r.slice_index << "," << buf
               << "," << r.file << "\n";
        }
    }
    fs::rename(tmp, manifest_path);
    if (log)
        *log << "prepared " << result.volumes << " volumes, " << result.slices << " slices ("
             << result.subject_errors.size() << " subject errors)\n";
    return result;
}

std::vector<ManifestRecord> read_manifest(const std::string& cache_dir) {
    const fs::path path = fs::path(cache_dir) / kManifestName;
    std::ifstream is(path);
    if (!is) throw IoError("cannot read manifest: " + path.string());
    std::vector<ManifestRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("subject,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string field;
        ManifestRecord r;
        std::getline(ss, r.subject, ',');
        std::getline(ss, field, ',');
        r.phase = phase_from_string(field);
        std::getline(ss, field, ',');
        r.slice_index = std::stoi(field);
        std::getline(ss, field, ',');
        r.z.rv = std::stod(field);
        std::getline(ss, field, ',');
        r.z.myo = std::stod(field);
        std::getline(ss, field, ',');
        r.z.lv = std::stod(field);
        std::getline(ss, r.file, ',');
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SliceSample> load_volume_slices(const std::string& cache_dir,
                                            const std::vector<ManifestRecord>& manifest,
                                            const std::string& subject, Phase phase) {
    std::vector<const ManifestRecord*> recs;
    for (const auto& r : manifest)
        if (r.subject == subject && r.phase == phase) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(),
              [](const ManifestRecord* a, const ManifestRecord* b) {
                  return a->slice_index < b->slice_index;
              });
    std::vector<SliceSample> out;
    out.reserve(recs.size());
    for (const auto* r : recs) out.push_back(load_slice(cache_dir, *r));
    return out;
}

std::vector<std::string> manifest_subjects(const std::vector<ManifestRecord>& manifest) {
    std::vector<std::string> ids;
    for (const auto& r : manifest) ids.push_back(r.subject);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

}  // namespace condseg
