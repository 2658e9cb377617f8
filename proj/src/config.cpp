#include "msseg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace msseg {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value, int line) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw std::invalid_argument("config line " + std::to_string(line) + ": bad value '" + value + "' for " + key);
    return out;
}

}  // namespace

EnergyParams RunConfig::energy() const {
    EnergyParams p;
    p.lambda = lambda;
    p.alpha = alpha;
    p.epsilon = epsilon;
    p.sigma = sigma;
    p.gamma = gamma;
    p.dt = dt;
    return p;
}

void RunConfig::validate() const {
    energy().validate();
    if (classes < 1) throw std::invalid_argument("config: classes must be at least 1");
    if (features < 1) throw std::invalid_argument("config: features must be at least 1");
    if (iters < 0) throw std::invalid_argument("config: iters must be nonnegative");
    if (grids < 1) throw std::invalid_argument("config: grids must be at least 1");
    if (th < 1) throw std::invalid_argument("config: th must be at least 1");
    if (mode != "admm" && mode != "multigrid") throw std::invalid_argument("config: mode must be admm or multigrid");
    if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
    if (!(lr_decay > 0.0)) throw std::invalid_argument("config: lr_decay must be positive");
    if (lr_interval < 1) throw std::invalid_argument("config: lr_interval must be at least 1");
    if (batch < 1) throw std::invalid_argument("config: batch must be at least 1");
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line) + ": expected key=value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (value.empty()) throw std::invalid_argument("config line " + std::to_string(line) + ": empty value for " + key);

        if (key == "classes") c.classes = parse_number<std::size_t>(key, value, line);
        else if (key == "features") c.features = parse_number<std::size_t>(key, value, line);
        else if (key == "lambda") c.lambda = parse_number<double>(key, value, line);
        else if (key == "alpha") c.alpha = parse_number<double>(key, value, line);
        else if (key == "epsilon") c.epsilon = parse_number<double>(key, value, line);
        else if (key == "sigma") c.sigma = parse_number<double>(key, value, line);
        else if (key == "gamma") c.gamma = parse_number<double>(key, value, line);
        else if (key == "dt") c.dt = parse_number<double>(key, value, line);
        else if (key == "iters") c.iters = parse_number<int>(key, value, line);
        else if (key == "grids") c.grids = parse_number<std::size_t>(key, value, line);
        else if (key == "th") c.th = parse_number<int>(key, value, line);
        else if (key == "mode") c.mode = value;
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value, line);
        else if (key == "lr") c.lr = parse_number<double>(key, value, line);
        else if (key == "lr_decay") c.lr_decay = parse_number<double>(key, value, line);
        else if (key == "lr_interval") c.lr_interval = parse_number<std::size_t>(key, value, line);
        else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value, line);
        else if (key == "batch") c.batch = parse_number<std::size_t>(key, value, line);
        else throw std::invalid_argument("config line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace msseg
