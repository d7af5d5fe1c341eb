#include "lncade/candidates.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lncade/errors.hpp"

namespace lncade {

namespace {
constexpr char kHeader[] = "patient_id,x_mm,y_mm,z_mm,label";
}

std::vector<Candidate> load_candidates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open candidate list: " + path.string());

    std::string line;
    if (!std::getline(in, line) || line.find("patient_id") == std::string::npos)
        throw DataError("candidate list missing header row: " + path.string());

    std::vector<Candidate> out;
    std::uint32_t index = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        Candidate c;
        std::string field;
        if (!std::getline(is, c.patient_id, ',')) goto malformed;
        if (!std::getline(is, field, ',')) goto malformed;
        c.center_mm.x = std::strtod(field.c_str(), nullptr);
        if (!std::getline(is, field, ',')) goto malformed;
        c.center_mm.y = std::strtod(field.c_str(), nullptr);
        if (!std::getline(is, field, ',')) goto malformed;
        c.center_mm.z = std::strtod(field.c_str(), nullptr);
        if (!std::getline(is, field)) goto malformed;
        c.label = std::stoi(field);
        if (c.label != 0 && c.label != 1)
            throw DataError("candidate label must be 0 or 1 at line " +
                            std::to_string(line_no) + " of " + path.string());
        if (!std::isfinite(c.center_mm.x) || !std::isfinite(c.center_mm.y) ||
            !std::isfinite(c.center_mm.z))
            throw DataError("candidate center must be finite at line " +
                            std::to_string(line_no) + " of " + path.string());
        c.index = index++;
        out.push_back(std::move(c));
        continue;
    malformed:
        throw DataError("malformed candidate row at line " + std::to_string(line_no) + " of " +
                        path.string());
    }
    return out;
}

void save_candidates(const std::vector<Candidate>& candidates,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write candidate list: " + path.string());
    out << kHeader << "\n";
    char buf[256];
    for (const auto& c : candidates) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%d\n", c.patient_id.c_str(),
                      c.center_mm.x, c.center_mm.y, c.center_mm.z, c.label);
        out << buf;
    }
    if (!out) throw DataError("failed writing candidate list: " + path.string());
}

}  // namespace lncade
