#include "eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "common.hpp"

namespace mf::eval {
namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// exact rational with __int128 intermediates
struct Rational {
    long long num = 0;
    long long den = 1;
};

std::optional<Rational> parse_rational(const std::string& raw) {
    std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    // strip surrounding $...$ and a leading +
    if (s.size() >= 2 && s.front() == '$' && s.back() == '$') s = trim(s.substr(1, s.size() - 2));
    if (!s.empty() && s.front() == '+') s = s.substr(1);

    // \frac{a}{b} form
    if (s.rfind("\\frac{", 0) == 0) {
        size_t close1 = s.find('}', 6);
        if (close1 != std::string::npos && close1 + 1 < s.size() && s[close1 + 1] == '{' &&
            s.back() == '}') {
            std::string a = s.substr(6, close1 - 6);
            std::string b = s.substr(close1 + 2, s.size() - close1 - 3);
            s = a + "/" + b;
        }
    }

    size_t slash = s.find('/');
    if (slash != std::string::npos) {
        auto lhs = parse_rational(s.substr(0, slash));
        auto rhs = parse_rational(s.substr(slash + 1));
        if (!lhs || !rhs || rhs->num == 0) return std::nullopt;
        __int128 num = static_cast<__int128>(lhs->num) * rhs->den;
        __int128 den = static_cast<__int128>(lhs->den) * rhs->num;
        if (den < 0) {
            num = -num;
            den = -den;
        }
        if (num > INT64_MAX || num < INT64_MIN || den > INT64_MAX || den == 0)
            return std::nullopt;
        return Rational{static_cast<long long>(num), static_cast<long long>(den)};
    }

    // integer or decimal
    bool negative = false;
    size_t i = 0;
    if (i < s.size() && s[i] == '-') {
        negative = true;
        ++i;
    }
    long long intpart = 0, fracpart = 0, fracden = 1;
    bool any_digit = false, seen_dot = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            any_digit = true;
            if (!seen_dot) {
                if (intpart > (INT64_MAX - 9) / 10) return std::nullopt;
                intpart = intpart * 10 + (c - '0');
            } else {
                if (fracden > INT64_MAX / 10) return std::nullopt;
                fracpart = fracpart * 10 + (c - '0');
                fracden *= 10;
            }
        } else if (c == '.' && !seen_dot) {
            seen_dot = true;
        } else {
            return std::nullopt;
        }
    }
    if (!any_digit) return std::nullopt;
    __int128 num = static_cast<__int128>(intpart) * fracden + fracpart;
    if (negative) num = -num;
    if (num > INT64_MAX || num < INT64_MIN) return std::nullopt;
    return Rational{static_cast<long long>(num), fracden};
}

bool rational_equal(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
}

std::string squeeze(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
    }
    return out;
}

}  // namespace

std::optional<std::string> extract_boxed(const std::string& text) {
    size_t pos = text.find("\\boxed{");
    if (pos == std::string::npos) return std::nullopt;
    size_t start = pos + 7;
    int depth = 1;
    for (size_t i = start; i < text.size(); ++i) {
        if (text[i] == '{') {
            ++depth;
        } else if (text[i] == '}') {
            if (--depth == 0) return text.substr(start, i - start);
        }
    }
    return std::nullopt;
}

int metric_math_equal(const std::string& prediction, const std::string& gold) {
    auto canon = [](const std::string& s) {
        auto boxed = extract_boxed(s);
        return trim(boxed ? *boxed : s);
    };
    std::string p = canon(prediction);
    std::string g = canon(gold);
    if (p.empty() || g.empty()) return p == g && !p.empty() ? 1 : 0;

    auto rp = parse_rational(p);
    auto rg = parse_rational(g);
    if (rp && rg) {
        if (rational_equal(*rp, *rg)) return 1;
        double dp = static_cast<double>(rp->num) / static_cast<double>(rp->den);
        double dg = static_cast<double>(rg->num) / static_cast<double>(rg->den);
        return std::fabs(dp - dg) <= 1e-9 ? 1 : 0;
    }
    return squeeze(p) == squeeze(g) ? 1 : 0;
}

std::vector<std::string> f1_normalize_tokens(const std::string& text) {
    std::string cleaned;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cleaned += static_cast<char>(std::tolower(c));
        } else {
            cleaned += ' ';
        }
    }
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") tokens.push_back(cur);
        cur.clear();
    };
    for (char c : cleaned) {
        if (c == ' ') {
            flush();
        } else {
            cur += c;
        }
    }
    flush();
    return tokens;
}

double metric_f1(const std::string& prediction, const std::string& gold) {
    auto pt = f1_normalize_tokens(prediction);
    auto gt = f1_normalize_tokens(gold);
    if (pt.empty() || gt.empty()) return 0.0;

    std::map<std::string, int> gold_counts;
    for (const auto& t : gt) ++gold_counts[t];
    int overlap = 0;
    for (const auto& t : pt) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            ++overlap;
            --it->second;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / pt.size();
    double recall = static_cast<double>(overlap) / gt.size();
    return 2.0 * precision * recall / (precision + recall);
}

void check_external_evaluator(const ExternalEvaluator& ev) {
    if (ev.command_template.empty()) {
        fail(ErrorKind::ExternalEvaluatorMissing,
             "pass@1 metric selected but no external evaluator command configured");
    }
}

int metric_pass_at_1_external(const std::string& prediction, const std::string& task_fixture,
                              const ExternalEvaluator& ev) {
    check_external_evaluator(ev);
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / ("mf_eval_" + digest_hex(prediction + task_fixture));
    fs::create_directories(dir);
    fs::path pred_file = dir / "prediction.txt";
    fs::path fixture_file = dir / "fixture.txt";
    write_file_atomic(pred_file, prediction);
    write_file_atomic(fixture_file, task_fixture);

    std::string cmd = ev.command_template;
    auto replace_all = [](std::string& s, const std::string& from, const std::string& to) {
        size_t pos = 0;
        while ((pos = s.find(from, pos)) != std::string::npos) {
            s.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all(cmd, "{prediction}", pred_file.string());
    replace_all(cmd, "{fixture}", fixture_file.string());

    int status = std::system(cmd.c_str());
    std::error_code ec;
    fs::remove_all(dir, ec);
    return status == 0 ? 1 : 0;
}

}  // namespace mf::eval
