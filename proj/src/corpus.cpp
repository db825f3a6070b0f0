#include "lsh/corpus.hpp"

#include "lsh/errors.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

namespace lsh {

const char* to_string(Tokenization t) {
    return t == Tokenization::chars ? "char" : "word";
}

Tokenization tokenization_from_string(const std::string& s) {
    if (s == "char") return Tokenization::chars;
    if (s == "word") return Tokenization::words;
    throw InvalidArgumentError("unknown tokenization: " + s + " (allowed: char, word)");
}

Corpus corpus_from_text(const std::string& text, Tokenization tokenization) {
    if (text.empty()) throw InvalidDataError("corpus text is empty");
    Corpus corpus;
    corpus.tokenization = tokenization;
    std::unordered_map<std::string, int32_t> table;

    auto intern = [&](const std::string& token) {
        auto [it, inserted] = table.try_emplace(token, static_cast<int32_t>(corpus.vocab.size()));
        if (inserted) corpus.vocab.push_back(token);
        corpus.ids.push_back(it->second);
    };

    if (tokenization == Tokenization::chars) {
        for (char c : text) intern(std::string(1, c));
    } else {
        std::istringstream stream(text);
        std::string word;
        while (stream >> word) intern(word);
        if (corpus.ids.empty()) throw InvalidDataError("corpus contains no words");
    }
    return corpus;
}

Corpus load_corpus(const std::string& path, Tokenization tokenization) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path);
    return corpus_from_text(buffer.str(), tokenization);
}

CorpusSplits split_corpus(const Corpus& corpus, double train_frac, double val_frac) {
    if (!(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0)) {
        throw InvalidArgumentError("split_corpus: fractions must be positive with sum < 1");
    }
    const auto n = static_cast<size_t>(corpus.size());
    auto train_end = static_cast<size_t>(train_frac * static_cast<double>(n));
    auto val_end = train_end + static_cast<size_t>(val_frac * static_cast<double>(n));
    CorpusSplits s;
    s.train.assign(corpus.ids.begin(), corpus.ids.begin() + static_cast<long>(train_end));
    s.val.assign(corpus.ids.begin() + static_cast<long>(train_end),
                 corpus.ids.begin() + static_cast<long>(val_end));
    s.test.assign(corpus.ids.begin() + static_cast<long>(val_end), corpus.ids.end());
    return s;
}

BatchSet make_batches(const std::vector<int32_t>& ids, Index batch_size, Index bptt) {
    if (batch_size < 1 || bptt < 1) {
        throw InvalidArgumentError("make_batches: batch_size and bptt must be >= 1");
    }
    const Index len = static_cast<Index>(ids.size());
    if (len < batch_size * (bptt + 1)) {
        throw InvalidArgumentError("make_batches: corpus too short (" + std::to_string(len) +
                                   " tokens) for batch " + std::to_string(batch_size) +
                                   " x bptt " + std::to_string(bptt));
    }

    const Index stream_len = len / batch_size;
    const Index num_blocks = (stream_len - 1) / bptt;

    BatchSet set;
    set.batch_size = batch_size;
    set.bptt = bptt;
    // row b reads the contiguous slice [b*stream_len, (b+1)*stream_len)
    for (Index blk = 0; blk < num_blocks; ++blk) {
        Batch batch;
        batch.input.resize(batch_size, bptt);
        batch.target.resize(batch_size, bptt);
        for (Index b = 0; b < batch_size; ++b) {
            const Index base = b * stream_len + blk * bptt;
            for (Index t = 0; t < bptt; ++t) {
                batch.input(b, t) = ids[static_cast<size_t>(base + t)];
                batch.target(b, t) = ids[static_cast<size_t>(base + t + 1)];
            }
        }
        set.blocks.push_back(std::move(batch));
    }
    return set;
}

LsBatch make_ls_batch(const std::vector<int32_t>& ids, Index k, Index t, Index start) {
    if (k < 1 || t < 1) throw InvalidArgumentError("make_ls_batch: K and T must be >= 1");
    const Index len = static_cast<Index>(ids.size());
    if (start < 0 || start + k * t > len) {
        throw InvalidArgumentError("make_ls_batch: need " + std::to_string(k * t) +
                                   " tokens from offset " + std::to_string(start) +
                                   ", have " + std::to_string(len));
    }
    LsBatch batch;
    batch.tokens.resize(k, t);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < t; ++j)
            batch.tokens(i, j) = ids[static_cast<size_t>(start + i * t + j)];
    return batch;
}

}  // namespace lsh
