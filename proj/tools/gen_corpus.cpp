// Generates the bundled training text: deterministic pseudo-English prose
// sampled from a fixed word list with a Zipf rank distribution. The output
// is synthetic and carries no license restrictions.

#include "lsh/rng.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

const char* kWords[] = {
    "the", "of", "and", "a", "to", "in", "is", "was", "he", "for", "it", "with", "as",
    "his", "on", "be", "at", "by", "had", "not", "are", "but", "from", "or", "have",
    "an", "they", "which", "one", "you", "were", "her", "all", "she", "there", "would",
    "their", "we", "him", "been", "has", "when", "who", "will", "more", "no", "if",
    "out", "so", "said", "what", "up", "its", "about", "into", "than", "them", "can",
    "only", "other", "new", "some", "could", "time", "these", "two", "may", "then",
    "do", "first", "any", "my", "now", "such", "like", "our", "over", "man", "me",
    "even", "most", "made", "after", "also", "did", "many", "before", "must", "through",
    "back", "years", "where", "much", "your", "way", "well", "down", "should", "because",
    "each", "just", "those", "people", "how", "too", "little", "state", "good", "very",
    "make", "world", "still", "own", "see", "men", "work", "long", "get", "here",
    "between", "both", "life", "being", "under", "never", "day", "same", "another",
    "know", "while", "last", "might", "us", "great", "old", "year", "off", "come",
    "since", "against", "go", "came", "right", "used", "take", "three", "house",
    "whole", "place", "small", "found", "thought", "went", "say", "part", "once",
    "high", "general", "upon", "school", "every", "does", "got", "united", "left",
    "number", "course", "war", "until", "always", "away", "something", "fact",
    "water", "though", "less", "public", "put", "think", "almost", "hand", "enough",
    "far", "took", "head", "yet", "government", "system", "better", "set", "told",
    "nothing", "night", "end", "why", "called", "didnt", "eyes", "find", "going",
    "look", "asked", "later", "knew", "point", "next", "program", "city", "business",
    "give", "group", "toward", "young", "days", "let", "room", "within", "children",
    "side", "social", "given", "order", "national", "second", "possible", "rather",
    "per", "face", "among", "form", "important", "often", "things", "looked", "early",
    "white", "case", "become", "large", "need", "big", "four", "felt", "along", "ago",
    "word", "light", "best", "power", "country", "however", "home", "interest",
    "family", "turned", "door", "body", "others", "area", "close", "true", "open",
};
constexpr size_t kWordCount = sizeof(kWords) / sizeof(kWords[0]);

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: gen_corpus <bytes> <output-path>\n";
        return 1;
    }
    const long target = std::stol(argv[1]);
    const std::string path = argv[2];

    lsh::Rng rng(20250115);

    // Zipf rank weights over the word list
    std::vector<double> cumulative;
    double total = 0.0;
    for (size_t i = 0; i < kWordCount; ++i) {
        total += 1.0 / static_cast<double>(i + 1);
        cumulative.push_back(total);
    }
    auto draw_word = [&]() {
        double u = rng.uniform() * total;
        size_t lo = 0, hi = kWordCount - 1;
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (cumulative[mid] < u) lo = mid + 1;
            else hi = mid;
        }
        return kWords[lo];
    };

    std::string text;
    text.reserve(static_cast<size_t>(target) + 128);
    long sentences_in_paragraph = 0;
    while (static_cast<long>(text.size()) < target) {
        const uint64_t sentence_len = 4 + rng.below(9);
        for (uint64_t w = 0; w < sentence_len; ++w) {
            if (w) text.push_back(' ');
            text += draw_word();
            // occasional comma mid-sentence
            if (w + 1 < sentence_len && rng.uniform() < 0.08) text.push_back(',');
        }
        text += ". ";
        if (++sentences_in_paragraph >= 12) {
            text.pop_back();
            text.push_back('\n');
            sentences_in_paragraph = 0;
        }
    }
    text.resize(static_cast<size_t>(target));

    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        std::cerr << "write failed: " << path << "\n";
        return 1;
    }
    std::cout << "wrote " << text.size() << " bytes to " << path << "\n";
    return 0;
}
