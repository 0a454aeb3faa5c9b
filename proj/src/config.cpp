#include "dk2/config.hpp"

namespace dk2 {

KSchedule KSchedule::uniform(uint8_t k, uint64_t min_side, uint8_t kprime) {
    if (kprime == 0) kprime = k;
    KSchedule s;
    s.arity.push_back(kprime);
    while (s.side() < min_side || s.arity.size() < 2) s.arity.insert(s.arity.begin(), k);
    s.validate();
    return s;
}

KSchedule KSchedule::hybrid(uint64_t min_side, uint8_t kprime) {
    if (kprime == 0) kprime = 2;
    // Smallest level count whose 4,4,4,4,4,2,...,k' product covers min_side.
    for (uint64_t levels = 2;; ++levels) {
        KSchedule s;
        for (uint64_t l = 0; l + 1 < levels; ++l) s.arity.push_back(l < 5 ? 4 : 2);
        s.arity.push_back(kprime);
        if (s.side() >= min_side) {
            s.validate();
            return s;
        }
    }
}

KSchedule KSchedule::parse(const std::string& text, uint64_t min_side, uint8_t kprime) {
    if (text == "hybrid") return hybrid(min_side, kprime);
    if (text.find(',') == std::string::npos) {
        int k = std::stoi(text);
        if (k < 2 || k > 16) throw std::invalid_argument("k-schedule: arity out of range");
        return uniform(uint8_t(k), min_side, kprime);
    }
    KSchedule s;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t next = text.find(',', pos);
        if (next == std::string::npos) next = text.size();
        int k = std::stoi(text.substr(pos, next - pos));
        if (k < 2 || k > 16) throw std::invalid_argument("k-schedule: arity out of range");
        s.arity.push_back(uint8_t(k));
        pos = next + 1;
    }
    if (kprime != 0) s.arity.back() = kprime;
    s.validate();
    if (s.side() < min_side)
        throw std::invalid_argument("k-schedule: explicit schedule does not cover the matrix side");
    return s;
}

}  // namespace dk2
