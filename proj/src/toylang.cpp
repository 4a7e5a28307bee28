#include "toylang.hpp"

#include <cctype>
#include <cstdlib>
#include <map>
#include <sstream>
#include <vector>

namespace lsi {

namespace {

struct ToyError {
    std::string message;
};

class ExprParser {
  public:
    ExprParser(const std::string &text, const std::map<std::string, long long> &vars)
        : text_(text), vars_(vars) {}

    long long parse() {
        long long v = comparison();
        skip_ws();
        if (pos_ != text_.size()) {
            throw ToyError{"unexpected trailing input: " + text_.substr(pos_)};
        }
        return v;
    }

  private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            pos_++;
        }
    }

    bool eat(const char *op) {
        skip_ws();
        size_t len = std::char_traits<char>::length(op);
        if (text_.compare(pos_, len, op) == 0) {
            // don't let '<' swallow the prefix of '<='
            if (len == 1 && (op[0] == '<' || op[0] == '>') && pos_ + 1 < text_.size() &&
                text_[pos_ + 1] == '=') {
                return false;
            }
            pos_ += len;
            return true;
        }
        return false;
    }

    long long comparison() {
        long long lhs = additive();
        for (;;) {
            if (eat("==")) lhs = lhs == additive() ? 1 : 0;
            else if (eat("!=")) lhs = lhs != additive() ? 1 : 0;
            else if (eat("<=")) lhs = lhs <= additive() ? 1 : 0;
            else if (eat(">=")) lhs = lhs >= additive() ? 1 : 0;
            else if (eat("<")) lhs = lhs < additive() ? 1 : 0;
            else if (eat(">")) lhs = lhs > additive() ? 1 : 0;
            else return lhs;
        }
    }

    long long additive() {
        long long lhs = term();
        for (;;) {
            if (eat("+")) lhs += term();
            else if (eat("-")) lhs -= term();
            else return lhs;
        }
    }

    long long term() {
        long long lhs = unary();
        for (;;) {
            if (eat("*")) {
                lhs *= unary();
            } else if (eat("/")) {
                long long rhs = unary();
                if (rhs == 0) throw ToyError{"division by zero"};
                lhs /= rhs;
            } else if (eat("%")) {
                long long rhs = unary();
                if (rhs == 0) throw ToyError{"modulo by zero"};
                lhs %= rhs;
            } else {
                return lhs;
            }
        }
    }

    long long unary() {
        skip_ws();
        if (eat("-")) return -unary();
        return primary();
    }

    long long primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ToyError{"expected a value"};
        char c = text_[pos_];
        if (c == '(') {
            pos_++;
            long long v = comparison();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')') throw ToyError{"missing )"};
            pos_++;
            return v;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                pos_++;
            }
            return std::stoll(text_.substr(start, pos_ - start));
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                pos_++;
            }
            std::string name = text_.substr(start, pos_ - start);
            auto it = vars_.find(name);
            if (it == vars_.end()) throw ToyError{"undefined variable: " + name};
            return it->second;
        }
        throw ToyError{std::string("unexpected character '") + c + "'"};
    }

    const std::string &text_;
    const std::map<std::string, long long> &vars_;
    size_t pos_ = 0;
};

std::string trim(const std::string &s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

int run_toy_program(const std::string &source, std::string *output) {
    std::map<std::string, long long> vars;
    std::istringstream lines(source);
    std::string raw;
    int line_no = 0;
    auto emit = [&](const std::string &s) {
        if (output != nullptr) {
            output->append(s);
            output->push_back('\n');
        }
    };

    try {
        while (std::getline(lines, raw)) {
            line_no++;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#') continue;

            if (line == "loop") {
                volatile long long spin = 0;
                for (;;) spin = spin + 1; // until killed
            }
            if (line == "crash") {
                std::abort();
            }
            if (line.rfind("spam", 0) == 0 && (line.size() == 4 || line[4] == ' ')) {
                long long count = ExprParser(line.substr(4).empty() ? "100000" : line.substr(4),
                                             vars)
                                      .parse();
                for (long long i = 0; i < count; i++) emit("spam spam spam spam");
                continue;
            }
            if (line.rfind("print ", 0) == 0) {
                emit(std::to_string(ExprParser(line.substr(6), vars).parse()));
                continue;
            }
            if (line.rfind("assert ", 0) == 0) {
                if (ExprParser(line.substr(7), vars).parse() == 0) {
                    emit("assert failed at line " + std::to_string(line_no) + ": " + line);
                    return 1;
                }
                continue;
            }
            size_t eq = line.find('=');
            // '=' that is not part of ==, <=, >=, !=
            if (eq != std::string::npos && eq > 0 && line[eq - 1] != '=' && line[eq - 1] != '<' &&
                line[eq - 1] != '>' && line[eq - 1] != '!' &&
                (eq + 1 >= line.size() || line[eq + 1] != '=')) {
                std::string name = trim(line.substr(0, eq));
                if (name.empty() ||
                    !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) {
                    throw ToyError{"bad assignment target: " + name};
                }
                vars[name] = ExprParser(line.substr(eq + 1), vars).parse();
                continue;
            }
            throw ToyError{"unrecognized statement: " + line};
        }
    } catch (const ToyError &e) {
        emit("error at line " + std::to_string(line_no) + ": " + e.message);
        return 2;
    }
    return 0;
}

} // namespace lsi
