#pragma once

#include "lsh/rnn_cells.hpp"
#include "lsh/sparsity.hpp"
#include "lsh/types.hpp"

#include <string>
#include <variant>
#include <vector>

namespace lsh {

enum class Arch { stacked_lstm, rhn };

const char* to_string(Arch a);
Arch arch_from_string(const std::string& s);

struct ModelProfile {
    Arch arch = Arch::stacked_lstm;
    Index vocab = 0;
    Index hidden = 64;
    Index embedding = 64;
    Index layers = 2;  // LSTM layer count, or RHN recurrence depth
    bool tied = false;
    bool coupled = false;  // RHN only
    double dropout_output = 0.0;
};

// The trainable object: embedding, recurrent stack, decoder, plus masks
// over the prunable (input + recurrent) weight matrices. Biases, embedding
// and decoder stay dense.
struct SparseModel {
    ModelProfile profile;
    Mat embedding;  // embedding x vocab, one column per token
    std::variant<StackedLstmParams, RhnParams> rnn;
    Mat decoder_w;  // vocab x hidden; empty when tied (decoder = embedding^T)
    Vec decoder_b;  // vocab
    MaskSet masks;
    CandidateConfig config;  // candidate that produced this model

    bool is_lstm() const { return std::holds_alternative<StackedLstmParams>(rnn); }
    const StackedLstmParams& lstm() const { return std::get<StackedLstmParams>(rnn); }
    StackedLstmParams& lstm() { return std::get<StackedLstmParams>(rnn); }
    const RhnParams& rhn() const { return std::get<RhnParams>(rnn); }
    RhnParams& rhn() { return std::get<RhnParams>(rnn); }

    Index state_dim() const;
    std::vector<Shape> prunable() const;

    // zero out masked positions (weights .cwiseProduct(mask), the same
    // arithmetic as a pre-masked dense model)
    void enforce_masks();

    // decoder weight view honoring tying
    const Mat& decoder() const { return profile.tied ? embedding : decoder_w; }
};

// Trainable tensors in a fixed order. The first `prunable_count` matrices
// line up with the canonical mask order.
struct ParamRefs {
    std::vector<Mat*> mats;
    std::vector<Vec*> vecs;
    size_t prunable_count = 0;
};

ParamRefs collect_params(SparseModel& model);

// Fresh model: seeded uniform init in [-1/sqrt(hidden), 1/sqrt(hidden)],
// masks from sparse_init, masked positions zeroed.
SparseModel init_model(const ModelProfile& profile, const CandidateConfig& config,
                       double global_sparsity);

// Dense variant: all-ones masks (the reference network).
SparseModel init_dense_model(const ModelProfile& profile, uint64_t seed);

// Versioned binary container: architecture tag, dimensions, parameter
// tensors and masks. Round-trips are bit-exact (see docs/checkpoint.md).
void save_checkpoint(const SparseModel& model, const std::string& path);
SparseModel load_checkpoint(const std::string& path);

}  // namespace lsh
