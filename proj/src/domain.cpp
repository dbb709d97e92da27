#include "spiral/domain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <sstream>

namespace spiral {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Drops fence lines (``` or ```lang) so wrapped replies still parse.
std::string strip_code_fences(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (eol == std::string::npos ? text.size() : eol) - pos);
        std::string t = trim(line);
        if (t.rfind("```", 0) != 0) {
            out.append(line);
            out.push_back('\n');
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return out;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp <= 0x7f) {
        out += static_cast<char>(cp);
    } else if (cp <= 0x7ff) {
        out += static_cast<char>(0xc0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp <= 0xffff) {
        out += static_cast<char>(0xe0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
        out += static_cast<char>(0xf0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    }
}

// Recursive-descent scanner for the action grammar. Positions refer to the
// de-fenced text; errors carry the original raw reply.
class Scanner {
public:
    Scanner(std::string_view text, std::size_t pos, const std::string& raw)
        : text_(text), pos_(pos), raw_(raw) {}

    Action parse_call();

private:
    std::string_view text_;
    std::size_t pos_;
    const std::string& raw_;

    [[noreturn]] void fail(const std::string& message) const {
        throw ParseError(message, raw_);
    }

    bool done() const { return pos_ >= text_.size(); }
    char peek() const { return done() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!done() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    void expect(char c, const char* context) {
        skip_ws();
        if (done() || text_[pos_] != c)
            fail(std::string("expected '") + c + "' in " + context);
        ++pos_;
    }

    bool try_eat(char c) {
        skip_ws();
        if (!done() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    bool try_eat_word(std::string_view word) {
        skip_ws();
        if (text_.substr(pos_, word.size()) != word) return false;
        std::size_t after = pos_ + word.size();
        if (after < text_.size() && ident_char(text_[after])) return false;
        pos_ = after;
        return true;
    }

    std::string parse_string() {
        skip_ws();
        if (done() || (text_[pos_] != '"' && text_[pos_] != '\''))
            fail("expected string literal");
        char quote = text_[pos_++];
        std::string value;
        while (true) {
            if (done()) fail("unterminated string literal");
            char c = text_[pos_++];
            if (c == quote) break;
            if (c == '\n') fail("newline inside string literal");
            if (c != '\\') {
                value += c;
                continue;
            }
            if (done()) fail("dangling escape");
            char e = text_[pos_++];
            switch (e) {
            case '"': value += '"'; break;
            case '\'': value += '\''; break;
            case '\\': value += '\\'; break;
            case '/': value += '/'; break;
            case 'b': value += '\b'; break;
            case 'f': value += '\f'; break;
            case 'n': value += '\n'; break;
            case 'r': value += '\r'; break;
            case 't': value += '\t'; break;
            case 'u': value += parse_unicode_escape(); break;
            default: fail(std::string("unsupported escape \\") + e);
            }
        }
        return value;
    }

    std::string parse_unicode_escape() {
        std::uint32_t cp = parse_hex4();
        if (cp >= 0xd800 && cp <= 0xdbff) {
            if (text_.substr(pos_, 2) != "\\u") fail("missing low surrogate");
            pos_ += 2;
            std::uint32_t low = parse_hex4();
            if (low < 0xdc00 || low > 0xdfff) fail("invalid low surrogate");
            cp = 0x10000 + ((cp - 0xd800) << 10) + (low - 0xdc00);
        } else if (cp >= 0xdc00 && cp <= 0xdfff) {
            fail("unpaired low surrogate");
        }
        std::string bytes;
        append_utf8(bytes, cp);
        return bytes;
    }

    std::uint32_t parse_hex4() {
        if (pos_ + 4 > text_.size()) fail("truncated \\u escape");
        std::uint32_t value = 0;
        for (int i = 0; i < 4; ++i) {
            char c = text_[pos_++];
            value <<= 4;
            if (c >= '0' && c <= '9') value |= static_cast<std::uint32_t>(c - '0');
            else if (c >= 'a' && c <= 'f') value |= static_cast<std::uint32_t>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') value |= static_cast<std::uint32_t>(c - 'A' + 10);
            else fail("bad hex digit in \\u escape");
        }
        return value;
    }

    ArgValue parse_number() {
        skip_ws();
        std::size_t start = pos_;
        if (peek() == '-') ++pos_;
        while (!done() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        bool integral = true;
        if (peek() == '.') {
            integral = false;
            ++pos_;
            while (!done() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
        if (peek() == 'e' || peek() == 'E') {
            integral = false;
            ++pos_;
            if (peek() == '+' || peek() == '-') ++pos_;
            while (!done() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
        std::string_view token = text_.substr(start, pos_ - start);
        if (token.empty() || token == "-") fail("malformed number literal");
        if (integral) {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec == std::errc() && p == token.data() + token.size()) return ArgValue(v);
        }
        double d = 0.0;
        auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), d);
        if (ec != std::errc() || p != token.data() + token.size())
            fail("malformed number literal");
        return ArgValue(d);
    }

    // depth 0: a top-level argument value; depth 1: inside a nested object.
    ArgValue parse_value(int depth) {
        skip_ws();
        if (done()) fail("missing value");
        char c = peek();
        if (c == '"' || c == '\'') return ArgValue(parse_string());
        if (c == '{') {
            if (depth >= 1) fail("object nesting deeper than one level");
            return parse_object(depth + 1);
        }
        if (c == '[') fail("array literals are not supported");
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return parse_number();
        if (try_eat_word("true")) return ArgValue(true);
        if (try_eat_word("false")) return ArgValue(false);
        fail("unrecognized value literal");
    }

    ArgValue parse_object(int depth) {
        expect('{', "argument object");
        ArgValue object = ArgValue::object();
        skip_ws();
        if (try_eat('}')) return object;
        while (true) {
            std::string key = parse_string();
            if (key.empty()) fail("empty argument name");
            expect(':', "argument object");
            object[key] = parse_value(depth);
            skip_ws();
            if (try_eat(',')) continue;
            expect('}', "argument object");
            break;
        }
        return object;
    }
};

Action Scanner::parse_call() {
    if (try_eat_word("api_call")) {
        expect('(', "api_call");
        std::string name = parse_string();
        if (name.empty()) fail("empty tool name");
        expect(',', "api_call");
        ArgValue args = parse_object(0);
        expect(')', "api_call");
        return Action::api_call(std::move(name), std::move(args));
    }
    if (try_eat_word("finish")) {
        expect('(', "finish");
        if (!try_eat_word("reason")) fail("finish requires reason=\"...\"");
        expect('=', "finish");
        std::string reason = parse_string();
        expect(')', "finish");
        return Action::finish(std::move(reason));
    }
    fail("no api_call or finish at parse position");
}

void render_scalar(std::ostringstream& out, const ArgValue& value) {
    out << value.dump();
}

void render_object(std::ostringstream& out, const ArgValue& object) {
    out << '{';
    bool first = true;
    for (const auto& [key, value] : object.items()) {
        if (!first) out << ", ";
        first = false;
        out << nlohmann::json(key).dump() << ": ";
        if (value.is_object()) render_object(out, value);
        else render_scalar(out, value);
    }
    out << '}';
}

} // namespace

ParamType param_type_from_string(const std::string& text) {
    if (text == "string") return ParamType::String;
    if (text == "number") return ParamType::Number;
    if (text == "boolean") return ParamType::Boolean;
    if (text == "object") return ParamType::Object;
    throw DomainError("unknown param type: " + text);
}

std::string to_string(ParamType type) {
    switch (type) {
    case ParamType::String: return "string";
    case ParamType::Number: return "number";
    case ParamType::Boolean: return "boolean";
    case ParamType::Object: return "object";
    }
    return "string";
}

const ParamSpec* ToolSpec::find_param(const std::string& param_name) const {
    for (const auto& p : params)
        if (p.name == param_name) return &p;
    return nullptr;
}

Action Action::api_call(std::string tool, ArgValue args) {
    if (!args.is_object()) throw DomainError("api_call args must be an object");
    Action a;
    a.kind = ActionKind::ApiCall;
    a.tool = std::move(tool);
    a.args = std::move(args);
    return a;
}

Action Action::finish(std::string reason) {
    Action a;
    a.kind = ActionKind::Finish;
    a.reason = std::move(reason);
    return a;
}

std::string Action::canonical() const {
    std::ostringstream out;
    if (kind == ActionKind::Finish) {
        out << "finish(reason=" << nlohmann::json(reason).dump() << ")";
        return out.str();
    }
    out << "api_call(" << nlohmann::json(tool).dump() << ", ";
    render_object(out, args);
    out << ")";
    return out.str();
}

bool Action::operator==(const Action& other) const {
    return canonical() == other.canonical();
}

Observation::Observation(std::string v) : value(std::move(v)) {
    if (value.find('\n') != std::string::npos)
        throw DomainError("observation must be a single line");
}

bool PlanStep::operator==(const PlanStep& other) const {
    return action == other.action && observation == other.observation;
}

bool PlanState::terminal() const noexcept {
    return !steps_.empty() && steps_.back().action.is_finish();
}

const ToolSpec* Task::find_tool(const std::string& name) const {
    for (const auto& tool : catalog)
        if (tool.name == name) return &tool;
    return nullptr;
}

Action parse_action(const std::string& text) {
    std::string cleaned = strip_code_fences(text);
    // Permit a preamble: parse from the first api_call/finish token.
    std::size_t best = std::string::npos;
    for (std::string_view token : {std::string_view("api_call"), std::string_view("finish")}) {
        std::size_t from = 0;
        while (true) {
            std::size_t at = cleaned.find(token.data(), from, token.size());
            if (at == std::string::npos) break;
            bool boundary = (at == 0 || !ident_char(cleaned[at - 1]));
            std::size_t after = at + token.size();
            while (after < cleaned.size() &&
                   std::isspace(static_cast<unsigned char>(cleaned[after])))
                ++after;
            if (boundary && after < cleaned.size() && cleaned[after] == '(') {
                best = std::min(best, at);
                break;
            }
            from = at + 1;
        }
    }
    if (best == std::string::npos)
        throw ParseError("no api_call(...) or finish(...) found", text);
    Scanner scanner(cleaned, best, text);
    return scanner.parse_call();
}

PlanState append_step(const PlanState& state, const Action& action,
                      const std::optional<Observation>& obs) {
    if (state.terminal())
        throw AlreadyTerminal("cannot append to a finished plan");
    if (action.is_finish() && obs.has_value())
        throw DomainError("finish step carries no observation");
    if (!action.is_finish() && !obs.has_value())
        throw DomainError("tool-call step requires an observation");
    PlanState next = state;
    next.steps_.push_back(PlanStep{action, obs});
    return next;
}

std::string render_history(const PlanState& state) {
    if (state.empty()) return "(empty plan)";
    std::ostringstream out;
    bool first = true;
    for (const auto& step : state.steps()) {
        if (!first) out << '\n';
        first = false;
        out << step.action.canonical();
        if (step.observation)
            out << "\nObservation: tool_output = " << step.observation->value;
    }
    return out.str();
}

} // namespace spiral
