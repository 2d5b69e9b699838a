#include "mdpopt/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace mdpopt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

Scalar number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where + " must be a number");
    return j.get<Scalar>();
}

Vector vector_of(const json& j, Index expected, const std::string& where) {
    if (!j.is_array() || static_cast<Index>(j.size()) != expected)
        fail(where + " must be an array of length " + std::to_string(expected));
    Vector out(expected);
    for (Index i = 0; i < expected; ++i) out(i) = number(j[static_cast<std::size_t>(i)], where);
    return out;
}

std::string num(Scalar x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

TabularMdp parse_mdp(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(e.what());
    }
    if (!doc.is_object()) fail("document must be an object");
    static const std::set<std::string> known{"num_states", "num_actions", "gamma", "transitions", "rewards", "e"};
    for (const auto& item : doc.items())
        if (!known.count(item.key())) fail("unknown key '" + item.key() + "'");
    for (const char* key : {"num_states", "num_actions", "gamma", "transitions", "rewards"})
        if (!doc.contains(key)) fail(std::string("missing key '") + key + "'");

    if (!doc["num_states"].is_number_integer() || !doc["num_actions"].is_number_integer())
        fail("num_states and num_actions must be integers");
    const Index n = doc["num_states"].get<Index>();
    const Index m = doc["num_actions"].get<Index>();
    if (n < 1 || m < 1) fail("num_states and num_actions must be positive");

    const json& jt = doc["transitions"];
    if (!jt.is_array() || static_cast<Index>(jt.size()) != m) fail("transitions must have num_actions entries");
    std::vector<Matrix> transitions;
    for (Index a = 0; a < m; ++a) {
        const json& rows = jt[static_cast<std::size_t>(a)];
        if (!rows.is_array() || static_cast<Index>(rows.size()) != n) fail("transitions[a] must have num_states rows");
        Matrix p(n, n);
        for (Index s = 0; s < n; ++s) p.row(s) = vector_of(rows[static_cast<std::size_t>(s)], n, "transitions row").transpose();
        transitions.push_back(std::move(p));
    }
    const json& jr = doc["rewards"];
    if (!jr.is_array() || static_cast<Index>(jr.size()) != m) fail("rewards must have num_actions entries");
    Matrix rewards(m, n);
    for (Index a = 0; a < m; ++a) rewards.row(a) = vector_of(jr[static_cast<std::size_t>(a)], n, "rewards row").transpose();

    std::optional<Vector> e;
    if (doc.contains("e")) e = vector_of(doc["e"], n, "e");
    return TabularMdp::from_arrays(std::move(transitions), rewards, number(doc["gamma"], "gamma"), e);
}

TabularMdp read_mdp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_mdp(buf.str());
}

std::string format_mdp(const TabularMdp& mdp) {
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    std::ostringstream os;
    auto vec = [&](auto&& get, Index len) {
        os << "[";
        for (Index i = 0; i < len; ++i) os << (i ? ", " : "") << num(get(i));
        os << "]";
    };
    os << "{\n";
    os << "  \"num_states\": " << n << ",\n";
    os << "  \"num_actions\": " << m << ",\n";
    os << "  \"gamma\": " << num(mdp.discount) << ",\n";
    os << "  \"transitions\": [\n";
    for (Index a = 0; a < m; ++a) {
        os << "    [\n";
        const Matrix& p = mdp.transitions[static_cast<std::size_t>(a)];
        for (Index s = 0; s < n; ++s) {
            os << "      ";
            vec([&](Index t) { return p(s, t); }, n);
            os << (s + 1 < n ? ",\n" : "\n");
        }
        os << "    ]" << (a + 1 < m ? ",\n" : "\n");
    }
    os << "  ],\n";
    os << "  \"rewards\": [\n";
    for (Index a = 0; a < m; ++a) {
        os << "    ";
        vec([&](Index s) { return mdp.rewards(s, a); }, n);
        os << (a + 1 < m ? ",\n" : "\n");
    }
    os << "  ],\n";
    os << "  \"e\": ";
    vec([&](Index s) { return mdp.weight_e(s); }, n);
    os << "\n}\n";
    return os.str();
}

void write_mdp_file(const TabularMdp& mdp, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write '" + path + "'");
    out << format_mdp(mdp);
}

} // namespace mdpopt
