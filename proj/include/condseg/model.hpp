#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "condseg/conditioning.hpp"
#include "condseg/layers.hpp"
#include "condseg/types.hpp"

namespace condseg {

enum class Architecture { unet, encoder_decoder };
enum class Mechanism { none, concat_raw, concat_mlp, film };
enum class FusionSite { early, middle, late, decoder };

const char* architecture_name(Architecture a);
Architecture architecture_from_string(const std::string& s);

// Architecture + conditioning mechanism + fusion site. Nine valid variants
// per architecture: baseline, concat {raw,mlp} x {early,middle,late}, and
// film x {decoder,late}.
struct FusionSpec {
    Architecture architecture = Architecture::unet;
    Mechanism mechanism = Mechanism::none;
    std::optional<FusionSite> site;

    void validate() const;
    std::string variant_id() const;

    static FusionSpec parse(const std::string& architecture, const std::string& variant);
    static const std::vector<std::string>& variant_ids();  // the 9 ids, table order
};

struct BackboneConfig {
    int in_channels = 1;
    int num_classes = 4;
    int depth = 4;          // number of down/upsampling stages
    int base_channels = 32; // channels at the first stage, doubling per stage
    double bn_momentum = 0.1;

    void validate() const;
    int stage_channels(int i) const;  // base * 2^i
    int bottleneck_channels() const { return stage_channels(depth - 1); }
};

// U-Net / skip-free encoder-decoder with one conditioning site. Forward
// signature is uniform across variants: (images [N,1,H,W], z [N,3]) ->
// logits [N,num_classes,H,W]; baseline models accept and ignore z.
class SegmentationModel {
public:
    SegmentationModel(BackboneConfig cfg, FusionSpec fusion, uint64_t seed);

    Tensor forward(const Tensor& images, const Tensor& z, bool train);
    void backward(const Tensor& dlogits);
    void zero_grad();

    const ParamRefs& params() { return params_; }
    const BufferRefs& buffers() { return buffers_; }
    long count_parameters() const;

    const BackboneConfig& config() const { return cfg_; }
    const FusionSpec& fusion() const { return fusion_; }
    uint64_t seed() const { return seed_; }

    // Weight-map IO (single file keyed by hierarchical parameter names;
    // batch-norm running statistics are stored alongside the parameters).
    void save_weights(const std::string& path) const;
    void load_weights(const std::string& path);
    std::vector<float> snapshot_state() const;
    void restore_state(const std::vector<float>& state);

    // Test hooks.
    Param* find_param(const std::string& name);
    void copy_matching_params_from(SegmentationModel& other);
    void randomize_parameters(uint64_t seed);

private:
    struct EncStage {
        Conv2d conv1;
        BatchNorm2d bn1;
        ReLU r1;
        Conv2d conv2;
        BatchNorm2d bn2;
        ReLU r2;
        MaxPool2 pool;
        EncStage(int in, int out, double mom)
            : conv1(in, out, 3, 1), bn1(out, mom), conv2(out, out, 3, 1), bn2(out, mom) {}
    };
    struct Bottleneck {
        Conv2d conv1;
        BatchNorm2d bn1;
        ReLU r1;
        Conv2d conv2;
        BatchNorm2d bn2;
        ReLU r2;
        Bottleneck(int in, int out, double mom)
            : conv1(in, out, 3, 1), bn1(out, mom), conv2(out, out, 3, 1), bn2(out, mom) {}
    };
    struct DecStage {
        UpsampleBilinear2 up;
        Conv2d upconv;
        BatchNorm2d upbn;
        ReLU upr;
        Conv2d conv1;
        BatchNorm2d bn1;
        ReLU r1;
        Conv2d conv2;
        BatchNorm2d bn2;
        std::unique_ptr<FilmLayer> film;  // decoder-fusion FiLM, after bn2
        ReLU r2;
        int in_after_concat;
        DecStage(int below, int out, int concat_in, double mom)
            : upconv(below, out, 3, 1),
              upbn(out, mom),
              conv1(concat_in, out, 3, 1),
              bn1(out, mom),
              conv2(out, out, 3, 1),
              bn2(out, mom),
              in_after_concat(concat_in) {}
    };

    BackboneConfig cfg_;
    FusionSpec fusion_;
    uint64_t seed_;

    std::vector<EncStage> enc_;
    std::unique_ptr<Bottleneck> bottleneck_;
    std::vector<DecStage> dec_;  // dec_[i] operates at encoder stage i's resolution
    std::unique_ptr<Conv2d> final_;
    std::unique_ptr<EmbeddingMlp> embed_;
    std::unique_ptr<FilmLayer> late_film_;

    ParamRefs params_;
    BufferRefs buffers_;

    // forward caches for backward
    bool skips_ = false;
    Tensor ztilde_cache_;
    int replicate_h_ = 0, replicate_w_ = 0;
    bool used_embed_ = false;

    void build();
    void register_params();
    void init_all_params();
};

// Stack per-slice class predictions into a 3D label volume. Slices must come
// from a single (subject, phase) and be ordered by slice_index.
MaskVolume3D forward_volume(SegmentationModel& model, const std::vector<SliceSample>& slices,
                            int batch_size = 8);

// Argmax over the class axis of [N,C,H,W] logits, ties to the lowest index.
void argmax_labels(const Tensor& logits, int sample, Mask2D& out);

// Checkpoint sidecar: key=value metadata next to the weight file.
struct CheckpointMeta {
    std::string architecture;
    std::string variant;
    int depth = 4;
    int base_channels = 32;
    uint64_t seed = 0;
    int epoch = 0;
};
void write_checkpoint_meta(const std::string& path, const CheckpointMeta& meta);
CheckpointMeta read_checkpoint_meta(const std::string& path);

}  // namespace condseg
