#include "snp/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "snp/errors.hpp"
#include "snp/splitmix.hpp"

namespace snp {

namespace {

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("expected a boolean, got '" + v + "'", line);
}

int parse_int(const std::string& v, int line) {
    int out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("expected an integer, got '" + v + "'", line);
    return out;
}

uint64_t parse_u64(const std::string& v, int line) {
    uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("expected an unsigned integer, got '" + v + "'", line);
    return out;
}

double parse_double(const std::string& v, int line) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + v + "'", line);
    }
}

std::vector<int> parse_int_list(const std::string& v, int line) {
    std::vector<int> out;
    std::string cur;
    std::istringstream ss(v);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (cur.empty()) throw ConfigError("empty entry in list '" + v + "'", line);
        out.push_back(parse_int(cur, line));
    }
    return out;
}

void parse_latent(const std::string& v, ToyBackendSpec& spec, int line) {
    int dims[3];
    size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        size_t x = i < 2 ? v.find('x', pos) : v.size();
        if (x == std::string::npos)
            throw ConfigError("latent must be CxHxW, got '" + v + "'", line);
        dims[i] = parse_int(trim(v.substr(pos, x - pos)), line);
        pos = x + 1;
    }
    spec.channels = dims[0];
    spec.height = dims[1];
    spec.width = dims[2];
}

std::string format_int_list(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void ExperimentConfig::set_path(const std::string& dotted_path, const std::string& value,
                                int line) {
    size_t dot = dotted_path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == dotted_path.size())
        throw ConfigError("expected section.key, got '" + dotted_path + "'", line);
    const std::string section = dotted_path.substr(0, dot);
    const std::string key = dotted_path.substr(dot + 1);
    const std::string v = trim(value);

    if (section == "backend") {
        if (key == "kind") {
            if (v != "toy" && v != "real")
                throw ConfigError("backend.kind must be toy or real, got '" + v + "'", line);
            backend.kind = v;
        } else if (key == "seed") {
            backend.toy.seed = parse_u64(v, line);
        } else if (key == "latent") {
            parse_latent(v, backend.toy, line);
        } else if (key == "site_count") {
            backend.toy.site_count = parse_int(v, line);
        } else if (key == "hidden_widths") {
            backend.toy.hidden_widths = parse_int_list(v, line);
        } else if (key == "embed_dim") {
            backend.toy.embed_dim = parse_int(v, line);
        } else if (key == "real_model") {
            backend.real.model = v;
        } else if (key == "real_control_model") {
            backend.real.control_model = v;
        } else if (key == "real_weights_dir") {
            backend.real.weights_dir = v;
        } else if (key == "real_device") {
            backend.real.device = v;
        } else {
            throw ConfigError("unknown key backend." + key, line);
        }
    } else if (section == "guidance") {
        if (key == "scale") {
            guidance.scale = parse_double(v, line);
        } else if (key == "lambda_t") {
            guidance.lambda_t = parse_double(v, line);
        } else if (key == "use_negative_control") {
            guidance.use_negative_control = parse_bool(v, line);
        } else if (key == "routing") {
            guidance.routing = v;
        } else {
            throw ConfigError("unknown key guidance." + key, line);
        }
    } else if (section == "wcm") {
        if (key == "enabled") {
            wcm.enabled = parse_bool(v, line);
        } else if (key == "canny_low") {
            wcm.params.canny_low = static_cast<float>(parse_double(v, line));
        } else if (key == "canny_high") {
            wcm.params.canny_high = static_cast<float>(parse_double(v, line));
        } else if (key == "dilation_radius") {
            wcm.params.dilation_radius = parse_int(v, line);
        } else if (key == "w_floor") {
            wcm.params.w_floor = static_cast<float>(parse_double(v, line));
        } else {
            throw ConfigError("unknown key wcm." + key, line);
        }
    } else if (section == "run") {
        if (key == "seed") {
            run.seed = parse_u64(v, line);
        } else if (key == "steps") {
            run.steps = parse_int(v, line);
        } else if (key == "batch") {
            run.batch = parse_int(v, line);
        } else if (key == "out") {
            run.out = v;
        } else {
            throw ConfigError("unknown key run." + key, line);
        }
    } else if (section == "routing") {
        if (!v.empty()) parse_int_list(v, line);  // validate only
        routing_entries[key] = v;
    } else if (section == "manifest") {
        if (key == "prompt") {
            manifest.prompt = v;
        } else if (key == "negative_prompt") {
            manifest.negative_prompt = v;
        } else if (key == "depth") {
            manifest.depth = v;
        } else if (key == "cell") {
            manifest.cell = v;
        } else if (key == "runid") {
            manifest.runid = v;
        } else {
            throw ConfigError("unknown key manifest." + key, line);
        }
    } else {
        throw ConfigError("unknown section [" + section + "]", line);
    }
}

ExperimentConfig ExperimentConfig::parse_text(std::string_view text,
                                              const std::string& source_name) {
    ExperimentConfig cfg;
    std::string section;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view raw =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        std::string ln = trim(raw);
        if (ln.empty() || ln[0] == '#') continue;
        if (ln.front() == '[') {
            if (ln.back() != ']')
                throw ConfigError(source_name + ": unterminated section header '" + ln + "'",
                                  line_no);
            section = trim(ln.substr(1, ln.size() - 2));
            if (section.empty()) throw ConfigError(source_name + ": empty section name", line_no);
            continue;
        }
        size_t eq = ln.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source_name + ": expected 'key = value', got '" + ln + "'", line_no);
        std::string key = trim(ln.substr(0, eq));
        std::string value = trim(ln.substr(eq + 1));
        if (key.empty()) throw ConfigError(source_name + ": empty key", line_no);
        if (section.empty())
            throw ConfigError(source_name + ": key '" + key + "' outside any section", line_no);
        cfg.set_path(section + "." + key, value, line_no);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path.string());
}

void ExperimentConfig::validate() const {
    if (backend.kind != "toy" && backend.kind != "real")
        throw ConfigError("backend.kind must be toy or real");
    backend.toy.validate();
    if (run.seed == 0) throw ConfigError("run.seed must be a positive integer");
    if (run.steps < 1) throw ConfigError("run.steps must be a positive integer");
    if (run.batch < 1) throw ConfigError("run.batch must be a positive integer");
    if (run.out.empty()) throw ConfigError("run.out must not be empty");
    if (!(guidance.scale > 0.0)) throw ConfigError("guidance.scale must be > 0");
    if (guidance.lambda_t < 0.0 || guidance.lambda_t > 1.0)
        throw ConfigError("guidance.lambda_t must be within [0,1]");
    if (wcm.enabled) {
        try {
            wcm.params.validate();
        } catch (const ContractViolation& e) {
            throw ConfigError(std::string("wcm: ") + e.what());
        }
    }
    for (const std::string& s : {manifest.prompt, manifest.negative_prompt})
        if (s.find('\n') != std::string::npos)
            throw ConfigError("prompts must not contain newlines");
}

std::string ExperimentConfig::canonical_text(bool with_manifest) const {
    std::ostringstream os;
    os << "[backend]\n";
    os << "kind = " << backend.kind << "\n";
    os << "seed = " << backend.toy.seed << "\n";
    os << "latent = " << backend.toy.channels << "x" << backend.toy.height << "x"
       << backend.toy.width << "\n";
    os << "site_count = " << backend.toy.site_count << "\n";
    os << "hidden_widths = " << format_int_list(backend.toy.hidden_widths) << "\n";
    os << "embed_dim = " << backend.toy.embed_dim << "\n";
    os << "real_model = " << backend.real.model << "\n";
    os << "real_control_model = " << backend.real.control_model << "\n";
    os << "real_weights_dir = " << backend.real.weights_dir << "\n";
    os << "real_device = " << backend.real.device << "\n";
    os << "\n[guidance]\n";
    os << "scale = " << format_double(guidance.scale) << "\n";
    os << "lambda_t = " << format_double(guidance.lambda_t) << "\n";
    os << "use_negative_control = " << (guidance.use_negative_control ? "true" : "false") << "\n";
    os << "routing = " << guidance.routing << "\n";
    os << "\n[wcm]\n";
    os << "enabled = " << (wcm.enabled ? "true" : "false") << "\n";
    os << "canny_low = " << format_double(wcm.params.canny_low) << "\n";
    os << "canny_high = " << format_double(wcm.params.canny_high) << "\n";
    os << "dilation_radius = " << wcm.params.dilation_radius << "\n";
    os << "w_floor = " << format_double(wcm.params.w_floor) << "\n";
    os << "\n[run]\n";
    os << "seed = " << run.seed << "\n";
    os << "steps = " << run.steps << "\n";
    os << "batch = " << run.batch << "\n";
    os << "out = " << run.out << "\n";
    if (!routing_entries.empty()) {
        os << "\n[routing]\n";
        for (const auto& [id, sites] : routing_entries) os << id << " = " << sites << "\n";
    }
    if (with_manifest) {
        os << "\n[manifest]\n";
        os << "prompt = " << manifest.prompt << "\n";
        os << "negative_prompt = " << manifest.negative_prompt << "\n";
        os << "depth = " << manifest.depth << "\n";
    }
    return os.str();
}

std::string ExperimentConfig::run_id() const {
    uint64_t h = fnv1a64(canonical_text(true));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace snp
