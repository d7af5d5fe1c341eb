#include "lncade/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "lncade/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "volume raw files are little-endian; big-endian hosts are unsupported");

namespace lncade {

namespace {

constexpr char kVolumeMagic[] = "# lncade volume 1";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void WindowLevel::validate() const {
    if (!(lo_hu < hi_hu)) throw DataError("window level requires lo_hu < hi_hu");
}

Volume::Volume(Dims3 dims, Vec3 spacing_mm, Vec3 origin_mm, std::vector<float> voxels)
    : dims_(dims), spacing_(spacing_mm), origin_(origin_mm), voxels_(std::move(voxels)) {
    if (dims_.nx < 2 || dims_.ny < 2 || dims_.nz < 2)
        throw DataError("volume dims must be >= 2 along every axis");
    if (!(spacing_.x > 0.0) || !(spacing_.y > 0.0) || !(spacing_.z > 0.0))
        throw DataError("volume spacing must be positive");
    if (voxels_.size() != dims_.count())
        throw DataError("volume voxel size mismatch: expected " + std::to_string(dims_.count()) +
                        " values, got " + std::to_string(voxels_.size()));
    // the SIMD samplers index voxels with 32-bit offsets
    if (dims_.count() > static_cast<std::size_t>(std::numeric_limits<int>::max()))
        throw DataError("volume too large: voxel count must fit in 32 bits");
}

Volume resample_isotropic(const Volume& v, double target_spacing_mm) {
    if (!(target_spacing_mm > 0.0)) throw DataError("target spacing must be positive");
    const double t = target_spacing_mm;
    const Dims3 in = v.dims();
    const Vec3 sp = v.spacing_mm();
    Dims3 out;
    out.nx = static_cast<int>(std::ceil(in.nx * sp.x / t));
    out.ny = static_cast<int>(std::ceil(in.ny * sp.y / t));
    out.nz = static_cast<int>(std::ceil(in.nz * sp.z / t));
    if (out.nx < 2 || out.ny < 2 || out.nz < 2)
        throw DataError("resample target spacing yields degenerate dims");

    std::vector<float> voxels(out.count());
    const kernels::GridView grid = v.grid_view();
    const auto& k = kernels::active();
    const Vec3 org = v.origin_mm();
    const double step[3] = {t, 0.0, 0.0};
    for (int kz = 0; kz < out.nz; ++kz) {
        for (int jy = 0; jy < out.ny; ++jy) {
            const double row_org[3] = {org.x, org.y + jy * t, org.z + kz * t};
            float* dst = voxels.data() +
                         static_cast<std::size_t>(out.nx) *
                             (static_cast<std::size_t>(jy) +
                              static_cast<std::size_t>(out.ny) * static_cast<std::size_t>(kz));
            k.sample_line(grid, row_org, step, static_cast<std::size_t>(out.nx), dst);
        }
    }
    return Volume(out, {t, t, t}, org, std::move(voxels));
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    fs::path sidecar = path;
    if (sidecar.extension() != ".vol") sidecar += ".vol";
    fs::path raw = sidecar;
    raw.replace_extension(".raw");

    {
        std::ofstream meta(sidecar, std::ios::trunc);
        if (!meta) throw DataError("cannot write volume metadata: " + sidecar.string());
        char buf[256];
        meta << kVolumeMagic << "\n";
        std::snprintf(buf, sizeof(buf), "dims = %d %d %d\n", v.dims().nx, v.dims().ny,
                      v.dims().nz);
        meta << buf;
        std::snprintf(buf, sizeof(buf), "spacing_mm = %.17g %.17g %.17g\n", v.spacing_mm().x,
                      v.spacing_mm().y, v.spacing_mm().z);
        meta << buf;
        std::snprintf(buf, sizeof(buf), "origin_mm = %.17g %.17g %.17g\n", v.origin_mm().x,
                      v.origin_mm().y, v.origin_mm().z);
        meta << buf;
        meta << "element_type = float32\n";
        meta << "byte_order = little_endian\n";
        meta << "data_file = " << raw.filename().string() << "\n";
        if (!meta) throw DataError("failed writing volume metadata: " + sidecar.string());
    }
    {
        std::ofstream data(raw, std::ios::binary | std::ios::trunc);
        if (!data) throw DataError("cannot write volume data: " + raw.string());
        data.write(reinterpret_cast<const char*>(v.voxels().data()),
                   static_cast<std::streamsize>(v.voxels().size() * sizeof(float)));
        if (!data) throw DataError("failed writing volume data: " + raw.string());
    }
}

Volume load_volume(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    std::ifstream meta(path);
    if (!meta) throw DataError("cannot open volume metadata: " + path.string());

    std::string line;
    std::getline(meta, line);
    if (trim(line) != kVolumeMagic)
        throw DataError("not a volume metadata file: " + path.string());

    std::map<std::string, std::string> kv;
    while (std::getline(meta, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("malformed metadata line in " + path.string() + ": " + line);
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    const auto need = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw DataError("volume metadata missing key '" + key + "': " + path.string());
        return it->second;
    };

    Dims3 dims;
    {
        std::istringstream is(need("dims"));
        if (!(is >> dims.nx >> dims.ny >> dims.nz))
            throw DataError("malformed dims in " + path.string());
    }
    Vec3 spacing, origin;
    {
        std::istringstream is(need("spacing_mm"));
        if (!(is >> spacing.x >> spacing.y >> spacing.z))
            throw DataError("malformed spacing_mm in " + path.string());
    }
    {
        std::istringstream is(need("origin_mm"));
        if (!(is >> origin.x >> origin.y >> origin.z))
            throw DataError("malformed origin_mm in " + path.string());
    }
    if (need("element_type") != "float32")
        throw DataError("unsupported element_type in " + path.string());
    if (need("byte_order") != "little_endian")
        throw DataError("unsupported byte_order in " + path.string());

    const fs::path raw = path.parent_path() / need("data_file");
    std::ifstream data(raw, std::ios::binary | std::ios::ate);
    if (!data) throw DataError("cannot open volume data: " + raw.string());
    const std::uint64_t bytes = static_cast<std::uint64_t>(data.tellg());
    const std::uint64_t expected =
        static_cast<std::uint64_t>(static_cast<std::size_t>(dims.nx) * dims.ny * dims.nz) *
        sizeof(float);
    if (bytes != expected)
        throw DataError("volume raw size mismatch: " + raw.string() + " has " +
                        std::to_string(bytes) + " bytes, metadata implies " +
                        std::to_string(expected));
    data.seekg(0);
    std::vector<float> voxels(static_cast<std::size_t>(dims.nx) * dims.ny * dims.nz);
    data.read(reinterpret_cast<char*>(voxels.data()), static_cast<std::streamsize>(bytes));
    if (!data) throw DataError("failed reading volume data: " + raw.string());

    return Volume(dims, spacing, origin, std::move(voxels));
}

}  // namespace lncade
