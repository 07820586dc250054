#include "charlab/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace charlab::text {

namespace {
constexpr uint32_t kCodepointLimit = 1114112;  // 17 planes of 65,536
}

bool is_whitespace(uint32_t c) {
    switch (c) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

DecodeResult decode_text(std::string_view utf8) {
    DecodeResult out;
    out.sequence.codepoints.reserve(utf8.size());
    out.sequence.char_offsets.reserve(utf8.size());
    size_t i = 0;
    const size_t n = utf8.size();
    auto byte_at = [&](size_t j) { return static_cast<uint8_t>(utf8[j]); };
    while (i < n) {
        const size_t start = i;
        const uint8_t b0 = byte_at(i);
        uint32_t cp = 0;
        size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1Fu;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0Fu;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07u;
            len = 4;
        } else {
            throw DataError("invalid UTF-8 lead byte at offset " + std::to_string(start));
        }
        if (start + len > n) throw DataError("truncated UTF-8 sequence at offset " + std::to_string(start));
        for (size_t k = 1; k < len; ++k) {
            const uint8_t b = byte_at(start + k);
            if ((b & 0xC0) != 0x80)
                throw DataError("invalid UTF-8 continuation byte at offset " + std::to_string(start + k));
            cp = (cp << 6) | (b & 0x3Fu);
        }
        // reject overlong encodings
        static constexpr uint32_t kMinByLen[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (len > 1 && cp < kMinByLen[len])
            throw DataError("overlong UTF-8 encoding at offset " + std::to_string(start));
        if (cp >= 0xD800 && cp <= 0xDFFF)
            throw DataError("surrogate codepoint at offset " + std::to_string(start));
        if (cp >= kCodepointLimit)
            throw DataError("codepoint out of range at offset " + std::to_string(start));
        i = start + len;
        if (is_pua(cp)) {
            ++out.pua_dropped;
            continue;
        }
        out.sequence.codepoints.push_back(cp);
        out.sequence.char_offsets.push_back(start);
    }
    return out;
}

std::string encode_utf8(uint32_t cp) {
    std::string s;
    if (cp < 0x80) {
        s.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        s.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        s.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return s;
}

std::string encode_utf8(const std::vector<uint32_t>& codepoints) {
    std::string s;
    s.reserve(codepoints.size());
    for (const uint32_t cp : codepoints) s += encode_utf8(cp);
    return s;
}

namespace {

struct ConlluWord {
    long id = 0;
    std::string form;
    std::string upos;
    std::string feats;
};

struct ConlluRange {
    long start = 0;
    long end = 0;
    std::string form;
};

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    size_t pos = 0;
    while (true) {
        const size_t tab = line.find('\t', pos);
        if (tab == std::string::npos) {
            cols.push_back(line.substr(pos));
            break;
        }
        cols.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
    return cols;
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Builds one TaggedSentence from accumulated word/range rows; returns false
// if a multiword range cannot be aligned to the word ids.
bool finish_sentence(const std::vector<ConlluWord>& words, const std::vector<ConlluRange>& ranges,
                     TaggedSentence& out) {
    size_t wi = 0;
    size_t ri = 0;
    auto append_token = [&](const std::string& form, const std::string& pos, const std::string& feats) {
        out.surface_tokens.push_back(form);
        out.composite_pos_labels.push_back(pos);
        out.composite_feats_labels.push_back(feats);
    };
    while (wi < words.size()) {
        if (ri < ranges.size() && ranges[ri].start == words[wi].id) {
            const ConlluRange& r = ranges[ri];
            if (r.end < r.start) return false;
            std::string pos, feats;
            long expect = r.start;
            while (expect <= r.end) {
                if (wi >= words.size() || words[wi].id != expect) return false;
                if (!pos.empty()) pos += '+';
                if (!feats.empty()) feats += '+';
                pos += words[wi].upos;
                feats += words[wi].feats;
                ++wi;
                ++expect;
            }
            append_token(r.form, pos, feats);
            ++ri;
        } else {
            append_token(words[wi].form, words[wi].upos, words[wi].feats);
            ++wi;
        }
    }
    if (ri != ranges.size()) return false;

    std::string joined;
    for (size_t i = 0; i < out.surface_tokens.size(); ++i) {
        if (i) joined += ' ';
        joined += out.surface_tokens[i];
    }
    const DecodeResult dec = decode_text(joined);
    out.sequence = dec.sequence;
    // first character index of each token in the joined codepoint sequence
    size_t char_pos = 0;
    for (size_t i = 0; i < out.surface_tokens.size(); ++i) {
        out.first_char_index.push_back(char_pos);
        char_pos += decode_text(out.surface_tokens[i]).sequence.size();
        char_pos += 1;  // the joining space
    }
    return true;
}

}  // namespace

ConlluCorpus load_conllu(std::istream& in) {
    ConlluCorpus corpus;
    std::vector<ConlluWord> words;
    std::vector<ConlluRange> ranges;
    bool bad_sentence = false;
    size_t line_no = 0;
    std::string line;

    auto flush = [&]() {
        if (words.empty() && ranges.empty()) {
            bad_sentence = false;
            return;
        }
        if (bad_sentence) {
            ++corpus.skipped_sentences;
        } else {
            TaggedSentence sent;
            if (finish_sentence(words, ranges, sent))
                corpus.sentences.push_back(std::move(sent));
            else
                ++corpus.skipped_sentences;
        }
        words.clear();
        ranges.clear();
        bad_sentence = false;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        if (line[0] == '#') continue;
        const std::vector<std::string> cols = split_tabs(line);
        if (cols.size() < 6)
            throw DataError("conllu: line " + std::to_string(line_no) + ": expected at least 6 tab-separated columns");
        const std::string& id = cols[0];
        const size_t dash = id.find('-');
        if (dash != std::string::npos) {
            const std::string lo = id.substr(0, dash), hi = id.substr(dash + 1);
            if (!all_digits(lo) || !all_digits(hi))
                throw DataError("conllu: line " + std::to_string(line_no) + ": malformed multiword id '" + id + "'");
            ranges.push_back({std::stol(lo), std::stol(hi), cols[1]});
        } else if (id.find('.') != std::string::npos) {
            continue;  // empty nodes: outside the supported subset
        } else if (all_digits(id)) {
            words.push_back({std::stol(id), cols[1], cols[3], cols[5]});
        } else {
            throw DataError("conllu: line " + std::to_string(line_no) + ": malformed token id '" + id + "'");
        }
    }
    flush();
    return corpus;
}

ConlluCorpus load_conllu_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("conllu: cannot open " + path);
    return load_conllu(in);
}

std::vector<SpanExample> load_span_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("spans: cannot open " + path);
    std::vector<SpanExample> examples;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("spans: line " + std::to_string(line_no) + ": " + e.what());
        }
        SpanExample ex;
        if (j.contains("tokens")) {
            ex.is_tagging = true;
            ex.tokens = j.at("tokens").get<std::vector<std::string>>();
            ex.bio_tags = j.at("bio").get<std::vector<std::string>>();
            if (ex.tokens.size() != ex.bio_tags.size())
                throw DataError("spans: line " + std::to_string(line_no) + ": one bio tag per token required");
            std::string joined;
            for (size_t i = 0; i < ex.tokens.size(); ++i) {
                if (i) joined += ' ';
                joined += ex.tokens[i];
            }
            ex.context = decode_text(joined).sequence;
        } else {
            ex.context = decode_text(j.at("context").get<std::string>()).sequence;
            if (j.contains("question")) ex.question = decode_text(j.at("question").get<std::string>()).sequence;
            ex.answer_start = j.at("answer_start").get<int64_t>();
            const std::string answer_text = j.at("answer_text").get<std::string>();
            const size_t answer_len = decode_text(answer_text).sequence.size();
            if (answer_len == 0) throw DataError("spans: line " + std::to_string(line_no) + ": empty answer");
            ex.answer_end = ex.answer_start + static_cast<int64_t>(answer_len) - 1;
            if (ex.answer_start < 0 || ex.answer_end >= static_cast<int64_t>(ex.context.size()))
                throw DataError("spans: line " + std::to_string(line_no) + ": answer span out of range");
            // the stated answer must actually occur at the stated position
            const std::vector<uint32_t> expect = decode_text(answer_text).sequence.codepoints;
            for (size_t k = 0; k < expect.size(); ++k) {
                if (ex.context.codepoints[static_cast<size_t>(ex.answer_start) + k] != expect[k])
                    throw DataError("spans: line " + std::to_string(line_no) + ": answer_text does not match context at answer_start");
            }
        }
        examples.push_back(std::move(ex));
    }
    return examples;
}

std::vector<CodepointSequence> make_pretrain_sequences(const std::vector<CodepointSequence>& docs,
                                                       size_t seq_len, Rng& rng) {
    if (seq_len < 4 || seq_len % 4 != 0)
        throw ConfigError("pretrain sequences: seq_len must be a positive multiple of the downsampling rate 4");
    std::vector<size_t> order;
    for (size_t i = 0; i < docs.size(); ++i)
        if (!docs[i].empty()) order.push_back(i);
    if (order.empty()) throw DataError("pretrain sequences: empty corpus");
    rng.shuffle(order);

    const size_t budget = seq_len - 2;
    std::vector<CodepointSequence> out;
    for (const size_t di : order) {
        const std::vector<uint32_t>& cps = docs[di].codepoints;
        size_t pos = 0;
        while (pos < cps.size()) {
            size_t take = std::min(budget, cps.size() - pos);
            if (pos + take < cps.size()) {
                // prefer to split just after the last whitespace in the window
                size_t split = 0;
                for (size_t k = 0; k < take; ++k)
                    if (is_whitespace(cps[pos + k])) split = k + 1;
                if (split > 0) take = split;
            }
            CodepointSequence seq;
            seq.codepoints.reserve(seq_len);
            seq.codepoints.push_back(Specials::cls);
            seq.codepoints.insert(seq.codepoints.end(), cps.begin() + static_cast<long>(pos),
                                  cps.begin() + static_cast<long>(pos + take));
            seq.codepoints.push_back(Specials::sep);
            seq.codepoints.resize(seq_len, Specials::pad);
            seq.char_offsets.assign(seq_len, 0);
            out.push_back(std::move(seq));
            pos += take;
        }
    }
    return out;
}

std::vector<CodepointSequence> load_corpus_file(const std::string& path, size_t* pua_dropped) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("corpus: cannot open " + path);
    std::vector<CodepointSequence> docs;
    std::string line;
    size_t dropped = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        DecodeResult dec = decode_text(line);
        dropped += dec.pua_dropped;
        if (!dec.sequence.empty()) docs.push_back(std::move(dec.sequence));
    }
    if (pua_dropped) *pua_dropped = dropped;
    return docs;
}

}  // namespace charlab::text
