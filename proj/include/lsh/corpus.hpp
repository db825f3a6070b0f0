#pragma once

#include "lsh/types.hpp"

#include <string>
#include <vector>

namespace lsh {

enum class Tokenization { chars, words };

const char* to_string(Tokenization t);
Tokenization tokenization_from_string(const std::string& s);

// Token ids plus the vocabulary that produced them. Vocabulary order is
// first appearance, so the same file always yields the same ids.
struct Corpus {
    std::vector<int32_t> ids;
    std::vector<std::string> vocab;
    Tokenization tokenization = Tokenization::chars;

    Index vocab_size() const { return static_cast<Index>(vocab.size()); }
    Index size() const { return static_cast<Index>(ids.size()); }
};

// char mode tokenizes bytes; word mode splits on whitespace.
Corpus load_corpus(const std::string& path, Tokenization tokenization);
Corpus corpus_from_text(const std::string& text, Tokenization tokenization);

struct CorpusSplits {
    std::vector<int32_t> train, val, test;
};

CorpusSplits split_corpus(const Corpus& corpus, double train_frac, double val_frac);

// Contiguous-column batching: the stream is cut into batch_size parallel
// columns of length floor(len / batch_size); block t covers bptt steps and
// targets are inputs shifted by one.
struct Batch {
    IntMat input;   // batch_size x bptt
    IntMat target;  // batch_size x bptt
};

struct BatchSet {
    std::vector<Batch> blocks;
    Index batch_size = 0;
    Index bptt = 0;

    Index num_blocks() const { return static_cast<Index>(blocks.size()); }
    Index tokens() const { return num_blocks() * batch_size * bptt; }
};

BatchSet make_batches(const std::vector<int32_t>& ids, Index batch_size, Index bptt);

// Fixed input windows for spectrum estimation: K disjoint token sequences
// of length T starting at `start`. The same windows serve every candidate
// and the reference within a run.
struct LsBatch {
    IntMat tokens;  // K x T
    Index samples() const { return tokens.rows(); }
    Index steps() const { return tokens.cols(); }
};

LsBatch make_ls_batch(const std::vector<int32_t>& ids, Index k, Index t, Index start = 0);

}  // namespace lsh
