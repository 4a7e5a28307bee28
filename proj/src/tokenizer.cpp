#include "tokenizer.hpp"

#include <sstream>

namespace lsi {
namespace tok {

std::vector<int> encode(std::string_view text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<int>(c));
    return ids;
}

std::string decode(const std::vector<int> &ids, bool strict) {
    std::vector<size_t> bad;
    std::string out;
    out.reserve(ids.size());
    for (size_t i = 0; i < ids.size(); i++) {
        int id = ids[i];
        if (id < 0 || id >= VOCAB_SIZE) {
            fail(ErrorCode::invalid_argument,
                 "decode: id " + std::to_string(id) + " at position " + std::to_string(i) +
                     " outside vocabulary");
        }
        if (is_special(id)) {
            bad.push_back(i);
            continue;
        }
        out.push_back(static_cast<char>(id));
    }
    if (strict && !bad.empty()) {
        std::ostringstream os;
        os << "decode: control ids at positions";
        for (size_t p : bad) os << " " << p;
        fail(ErrorCode::invalid_argument, os.str());
    }
    return out;
}

std::vector<int> truncate(std::vector<int> ids, size_t limit) {
    if (limit < 1) fail(ErrorCode::invalid_argument, "truncate: limit must be >= 1");
    if (ids.size() > limit) ids.resize(limit);
    return ids;
}

} // namespace tok
} // namespace lsi
