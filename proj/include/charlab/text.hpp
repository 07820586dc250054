#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "charlab/errors.hpp"
#include "charlab/rng.hpp"

namespace charlab::text {

// A document as Unicode scalar values plus the byte offset of each codepoint
// in the source text.
struct CodepointSequence {
    std::vector<uint32_t> codepoints;
    std::vector<size_t> char_offsets;

    size_t size() const { return codepoints.size(); }
    bool empty() const { return codepoints.empty(); }
};

// Special markers live in the Private Use Area so they stay inside the
// codepoint vocabulary; ingestion strips PUA characters from corpus text.
struct Specials {
    static constexpr uint32_t pad = 0xE000;
    static constexpr uint32_t cls = 0xE001;
    static constexpr uint32_t sep = 0xE002;
    static constexpr uint32_t mask = 0xE003;
};

inline bool is_pua(uint32_t c) { return c >= 0xE000 && c <= 0xF8FF; }
inline bool is_special(uint32_t c) {
    return c == Specials::pad || c == Specials::cls || c == Specials::sep || c == Specials::mask;
}

bool is_whitespace(uint32_t c);

struct DecodeResult {
    CodepointSequence sequence;
    size_t pua_dropped = 0;  // warning count, not an error
};

// Strict UTF-8 decoding: overlong encodings, surrogates, truncation and
// out-of-range values are rejected with the byte offset of the offence.
// PUA codepoints are dropped and counted. Re-encoding a PUA-free decode
// reproduces the input bytes exactly.
DecodeResult decode_text(std::string_view utf8);

std::string encode_utf8(const std::vector<uint32_t>& codepoints);
std::string encode_utf8(uint32_t codepoint);

// One sentence of a tagged corpus: whitespace-level surface tokens, one
// composite POS label and one composite FEATS label per token, and the index
// of each token's first character in the space-joined sentence text.
struct TaggedSentence {
    std::vector<std::string> surface_tokens;
    std::vector<std::string> composite_pos_labels;
    std::vector<std::string> composite_feats_labels;
    std::vector<size_t> first_char_index;
    CodepointSequence sequence;  // space-joined surface tokens
};

struct ConlluCorpus {
    std::vector<TaggedSentence> sentences;
    size_t skipped_sentences = 0;  // unalignable multiword ranges
};

// CoNLL-U subset: ID, FORM, UPOS, FEATS and multiword-token ranges. Syntactic
// tokens covered by a multiword range are merged into one surface token whose
// labels are the range's UPOS/FEATS values concatenated in order with '+'.
// Empty-node lines (decimal ids) are outside the subset and ignored.
ConlluCorpus load_conllu(std::istream& in);
ConlluCorpus load_conllu_file(const std::string& path);

// A span-extraction or tagging example (JSON-lines task format).
struct SpanExample {
    CodepointSequence context;
    CodepointSequence question;           // empty for tagging tasks
    int64_t answer_start = -1;            // inclusive character indices
    int64_t answer_end = -1;
    std::vector<std::string> tokens;      // tagging variant
    std::vector<std::string> bio_tags;    // one tag per token
    bool is_tagging = false;
};

std::vector<SpanExample> load_span_jsonl(const std::string& path);

// Fixed-length pretraining sequences: [cls] + text + [sep], right-padded to
// exactly seq_len. Documents longer than seq_len-2 are split at whitespace
// where possible, else hard-split; de-padded chunks concatenate back to the
// document. One document per sequence, no cross-document packing.
std::vector<CodepointSequence> make_pretrain_sequences(const std::vector<CodepointSequence>& docs,
                                                       size_t seq_len, Rng& rng);

// One document per line, UTF-8; PUA codepoints are stripped (counted into
// *pua_dropped when given). Empty lines are skipped.
std::vector<CodepointSequence> load_corpus_file(const std::string& path, size_t* pua_dropped = nullptr);

}  // namespace charlab::text
