#include "carnot/group_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "carnot/error.hpp"

namespace carnot {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

double parse_number(const std::string& tok, int line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": non-numeric token '" + tok + "'");
    }
    return v;
}

int parse_int(const std::string& tok, int line_no) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected integer, got '" + tok + "'");
    }
    return v;
}

}  // namespace

CarnotGroupSpec parse_group_spec(const std::string& text, const std::string& default_id) {
    CarnotGroupSpec spec;
    spec.id = default_id;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    bool saw_layers = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        auto toks = tokenize(line);
        if (toks.empty()) continue;
        if (toks.size() == 1 && toks[0].size() >= 2 && toks[0].front() == '[' && toks[0].back() == ']') {
            section = toks[0].substr(1, toks[0].size() - 2);
            if (section != "name" && section != "layers" && section != "brackets") {
                throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": unknown section [" + section + "]");
            }
            continue;
        }
        if (section == "name") {
            spec.id = toks[0];
        } else if (section == "layers") {
            for (const auto& t : toks) {
                int d = parse_int(t, line_no);
                if (d <= 0) throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": layer size must be positive");
                spec.layer_dims.push_back(d);
            }
            saw_layers = true;
        } else if (section == "brackets") {
            if (toks.size() != 4) {
                throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected 'i j k value'");
            }
            BracketEntry e;
            e.i = parse_int(toks[0], line_no) - 1;
            e.j = parse_int(toks[1], line_no) - 1;
            e.k = parse_int(toks[2], line_no) - 1;
            e.value = parse_number(toks[3], line_no);
            spec.brackets.push_back(e);
        } else {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": content outside a section");
        }
    }
    if (!saw_layers) throw Error(ErrorKind::ParseError, "missing [layers] section");
    return spec;
}

CarnotGroupSpec load_group_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::ParseError, "cannot open group spec '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_group_spec(ss.str(), std::filesystem::path(path).stem().string());
}

std::string format_group_spec(const CarnotGroupSpec& spec) {
    std::ostringstream os;
    os << "[name]\n" << spec.id << "\n[layers]\n";
    for (std::size_t s = 0; s < spec.layer_dims.size(); ++s) os << (s ? " " : "") << spec.layer_dims[s];
    os << "\n[brackets]\n";
    for (const auto& e : spec.brackets) os << e.i + 1 << " " << e.j + 1 << " " << e.k + 1 << " " << e.value << "\n";
    return os.str();
}

CarnotGroupSpec abelian_spec(int n) {
    CarnotGroupSpec s;
    s.id = "abelian" + std::to_string(n);
    s.layer_dims = {n};
    return s;
}

CarnotGroupSpec heisenberg_spec(int k) {
    CarnotGroupSpec s;
    s.id = "heisenberg" + std::to_string(k);
    s.layer_dims = {2 * k, 1};
    for (int p = 0; p < k; ++p) s.brackets.push_back({2 * p, 2 * p + 1, 2 * k, 1.0});
    return s;
}

CarnotGroupSpec free_step2_spec(int g) {
    CarnotGroupSpec s;
    s.id = "free_step2_" + std::to_string(g);
    int top = g * (g - 1) / 2;
    s.layer_dims = {g, top};
    int k = g;
    for (int i = 0; i < g; ++i)
        for (int j = i + 1; j < g; ++j) s.brackets.push_back({i, j, k++, 1.0});
    return s;
}

CarnotGroupSpec engel_spec() {
    CarnotGroupSpec s;
    s.id = "engel";
    s.layer_dims = {2, 1, 1};
    s.brackets.push_back({0, 1, 2, 1.0});
    s.brackets.push_back({0, 2, 3, 1.0});
    return s;
}

}  // namespace carnot
