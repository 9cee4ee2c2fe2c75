#include "drqr/porter.hpp"

#include <array>
#include <cstring>
#include <string_view>

namespace drqr {
namespace {

// Working state: word buffer b, last valid offset k, suffix-stem boundary j.
struct Stemmer {
    std::string b;
    int k = 0;
    int j = 0;

    bool cons(int i) const {
        switch (b[static_cast<std::size_t>(i)]) {
            case 'a': case 'e': case 'i': case 'o': case 'u':
                return false;
            case 'y':
                return i == 0 ? true : !cons(i - 1);
            default:
                return true;
        }
    }

    // Number of VC sequences in b[0..j].
    int measure() const {
        int n = 0;
        int i = 0;
        while (true) {
            if (i > j) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > j) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > j) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j; ++i)
            if (!cons(i)) return true;
        return false;
    }

    bool double_consonant(int i) const {
        if (i < 1) return false;
        if (b[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(i - 1)]) return false;
        return cons(i);
    }

    // consonant-vowel-consonant ending at i, final consonant not w/x/y
    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        char ch = b[static_cast<std::size_t>(i)];
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view s) {
        int length = static_cast<int>(s.size());
        if (length > k + 1) return false;
        if (std::string_view(b).substr(static_cast<std::size_t>(k - length + 1),
                                       static_cast<std::size_t>(length)) != s)
            return false;
        j = k - length;
        return true;
    }

    void set_to(std::string_view s) {
        b.replace(static_cast<std::size_t>(j + 1), b.size(), s);
        k = j + static_cast<int>(s.size());
    }

    void replace_if_measure(std::string_view s) {
        if (measure() > 0) set_to(s);
    }

    void step1ab() {
        if (b[static_cast<std::size_t>(k)] == 's') {
            if (ends("sses"))
                k -= 2;
            else if (ends("ies"))
                set_to("i");
            else if (b[static_cast<std::size_t>(k - 1)] != 's')
                --k;
        }
        if (ends("eed")) {
            if (measure() > 0) --k;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k = j;
            if (ends("at"))
                set_to("ate");
            else if (ends("bl"))
                set_to("ble");
            else if (ends("iz"))
                set_to("ize");
            else if (double_consonant(k)) {
                --k;
                char ch = b[static_cast<std::size_t>(k)];
                if (ch == 'l' || ch == 's' || ch == 'z') ++k;
            } else if (measure() == 1 && cvc(k)) {
                set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b[static_cast<std::size_t>(k)] = 'i';
    }

    struct Rule {
        std::string_view suffix;
        std::string_view replacement;
    };

    // First matching suffix decides the step; the m>0 condition then gates
    // the replacement.
    void apply_first(const Rule* rules, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            if (ends(rules[i].suffix)) {
                replace_if_measure(rules[i].replacement);
                return;
            }
        }
    }

    void step2() {
        if (k < 1) return;
        switch (b[static_cast<std::size_t>(k - 1)]) {
            case 'a': {
                static constexpr Rule r[] = {{"ational", "ate"}, {"tional", "tion"}};
                apply_first(r, 2);
                break;
            }
            case 'c': {
                static constexpr Rule r[] = {{"enci", "ence"}, {"anci", "ance"}};
                apply_first(r, 2);
                break;
            }
            case 'e': {
                static constexpr Rule r[] = {{"izer", "ize"}};
                apply_first(r, 1);
                break;
            }
            case 'l': {
                static constexpr Rule r[] = {{"bli", "ble"},   {"alli", "al"},
                                             {"entli", "ent"}, {"eli", "e"},
                                             {"ousli", "ous"}};
                apply_first(r, 5);
                break;
            }
            case 'o': {
                static constexpr Rule r[] = {{"ization", "ize"}, {"ation", "ate"}, {"ator", "ate"}};
                apply_first(r, 3);
                break;
            }
            case 's': {
                static constexpr Rule r[] = {{"alism", "al"},
                                             {"iveness", "ive"},
                                             {"fulness", "ful"},
                                             {"ousness", "ous"}};
                apply_first(r, 4);
                break;
            }
            case 't': {
                static constexpr Rule r[] = {{"aliti", "al"}, {"iviti", "ive"}, {"biliti", "ble"}};
                apply_first(r, 3);
                break;
            }
            case 'g': {
                static constexpr Rule r[] = {{"logi", "log"}};
                apply_first(r, 1);
                break;
            }
            default:
                break;
        }
    }

    void step3() {
        switch (b[static_cast<std::size_t>(k)]) {
            case 'e': {
                static constexpr Rule r[] = {{"icate", "ic"}, {"ative", ""}, {"alize", "al"}};
                apply_first(r, 3);
                break;
            }
            case 'i': {
                static constexpr Rule r[] = {{"iciti", "ic"}};
                apply_first(r, 1);
                break;
            }
            case 'l': {
                static constexpr Rule r[] = {{"ical", "ic"}, {"ful", ""}};
                apply_first(r, 2);
                break;
            }
            case 's': {
                static constexpr Rule r[] = {{"ness", ""}};
                apply_first(r, 1);
                break;
            }
            default:
                break;
        }
    }

    void step4() {
        if (k < 1) return;
        bool matched = false;
        switch (b[static_cast<std::size_t>(k - 1)]) {
            case 'a': matched = ends("al"); break;
            case 'c': matched = ends("ance") || ends("ence"); break;
            case 'e': matched = ends("er"); break;
            case 'i': matched = ends("ic"); break;
            case 'l': matched = ends("able") || ends("ible"); break;
            case 'n': matched = ends("ant") || ends("ement") || ends("ment") || ends("ent"); break;
            case 'o':
                matched = (ends("ion") && j >= 0 &&
                           (b[static_cast<std::size_t>(j)] == 's' ||
                            b[static_cast<std::size_t>(j)] == 't')) ||
                          ends("ou");
                break;
            case 's': matched = ends("ism"); break;
            case 't': matched = ends("ate") || ends("iti"); break;
            case 'u': matched = ends("ous"); break;
            case 'v': matched = ends("ive"); break;
            case 'z': matched = ends("ize"); break;
            default: return;
        }
        if (matched && measure() > 1) k = j;
    }

    void step5() {
        j = k;
        if (b[static_cast<std::size_t>(k)] == 'e') {
            int a = measure();
            if (a > 1 || (a == 1 && !cvc(k - 1))) --k;
        }
        if (b[static_cast<std::size_t>(k)] == 'l' && double_consonant(k) && measure() > 1) --k;
    }
};

}  // namespace

std::string porter_stem(std::string word) {
    if (word.size() <= 2) return word;
    Stemmer s;
    s.b = std::move(word);
    s.k = static_cast<int>(s.b.size()) - 1;
    s.step1ab();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5();
    s.b.resize(static_cast<std::size_t>(s.k + 1));
    return std::move(s.b);
}

}  // namespace drqr
