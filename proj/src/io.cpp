#include "fraclap/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace fraclap {

std::string mesh_to_json(const Mesh& mesh) {
    nlohmann::json j;
    j["domain"] = domain_name(mesh.domain());
    auto& verts = j["vertices"] = nlohmann::json::array();
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        const Vertex& vx = mesh.vertex(v);
        verts.push_back({vx.x, vx.y, vx.on_boundary});
    }
    auto& tris = j["triangles"] = nlohmann::json::array();
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Triangle& tr = mesh.triangle(t);
        tris.push_back({{"v", {tr.v[0], tr.v[1], tr.v[2]}}, {"generation", tr.generation}});
    }
    return j.dump(2);
}

Mesh mesh_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    std::vector<Vertex> verts;
    for (const auto& v : j.at("vertices"))
        verts.push_back({v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<bool>()});
    std::vector<Triangle> tris;
    for (const auto& t : j.at("triangles")) {
        Triangle tr;
        tr.v = {t.at("v").at(0).get<int>(), t.at("v").at(1).get<int>(), t.at("v").at(2).get<int>()};
        tr.generation = t.at("generation").get<int>();
        tris.push_back(tr);
    }
    return Mesh(domain_from_name(j.at("domain").get<std::string>()), std::move(verts),
                std::move(tris));
}

void records_to_csv(std::ostream& os, const std::vector<AdaptRecord>& records) {
    os << "level,nelems,ndofs,eta,error,energy,t_solve,t_estimate\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%.17g,%.6f,%.6f\n", r.level,
                      r.n_elements, r.n_dofs, r.eta, r.error, r.energy, r.t_solve, r.t_estimate);
        os << buf;
    }
}

namespace {

inline std::uint32_t rotl(std::uint32_t v, int k) { return (v << k) | (v >> (32 - k)); }

}  // namespace

std::string sha1_hex(const std::string& data) {
    std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
    std::string msg = data;
    const std::uint64_t bitlen = static_cast<std::uint64_t>(msg.size()) * 8;
    msg.push_back(static_cast<char>(0x80));
    while (msg.size() % 64 != 56) msg.push_back('\0');
    for (int i = 7; i >= 0; --i) msg.push_back(static_cast<char>((bitlen >> (8 * i)) & 0xff));

    for (size_t chunk = 0; chunk < msg.size(); chunk += 64) {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i) {
            w[i] = (static_cast<std::uint8_t>(msg[chunk + 4 * i]) << 24) |
                   (static_cast<std::uint8_t>(msg[chunk + 4 * i + 1]) << 16) |
                   (static_cast<std::uint8_t>(msg[chunk + 4 * i + 2]) << 8) |
                   static_cast<std::uint8_t>(msg[chunk + 4 * i + 3]);
        }
        for (int i = 16; i < 80; ++i) w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            const std::uint32_t tmp = rotl(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rotl(b, 30);
            b = a;
            a = tmp;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }
    char out[41];
    std::snprintf(out, sizeof(out), "%08x%08x%08x%08x%08x", h[0], h[1], h[2], h[3], h[4]);
    return out;
}

std::string loglog_svg(const std::vector<PlotSeries>& series,
                       const std::vector<double>& reference_slopes, const std::string& title) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (s.x[i] <= 0.0 || s.y[i] <= 0.0) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmin < xmax)) {
        xmin = 1.0;
        xmax = 10.0;
    }
    if (!(ymin < ymax)) {
        ymin = 0.1;
        ymax = 1.0;
    }
    const double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
    const double ly0 = std::log10(ymin) - 0.1, ly1 = std::log10(ymax) + 0.1;
    const int W = 640, H = 480, ML = 70, MR = 20, MT = 40, MB = 50;
    auto px = [&](double x) {
        return ML + (std::log10(x) - lx0) / (lx1 - lx0) * (W - ML - MR);
    };
    auto py = [&](double y) {
        return H - MB - (std::log10(y) - ly0) / (ly1 - ly0) * (H - MT - MB);
    };

    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
       << "</text>\n";
    // decade grid
    for (int e = static_cast<int>(std::ceil(lx0)); e <= static_cast<int>(std::floor(lx1)); ++e) {
        const double x = px(std::pow(10.0, e));
        os << "<line x1='" << x << "' y1='" << MT << "' x2='" << x << "' y2='" << H - MB
           << "' stroke='#ddd'/>\n";
        os << "<text x='" << x << "' y='" << H - MB + 18
           << "' text-anchor='middle' font-size='11'>1e" << e << "</text>\n";
    }
    for (int e = static_cast<int>(std::ceil(ly0)); e <= static_cast<int>(std::floor(ly1)); ++e) {
        const double y = py(std::pow(10.0, e));
        os << "<line x1='" << ML << "' y1='" << y << "' x2='" << W - MR << "' y2='" << y
           << "' stroke='#ddd'/>\n";
        os << "<text x='" << ML - 8 << "' y='" << y + 4
           << "' text-anchor='end' font-size='11'>1e" << e << "</text>\n";
    }
    // reference slope guides anchored at the top-right data corner
    for (double slope : reference_slopes) {
        const double xa = xmin, xb = xmax;
        const double yb = ymax;
        const double ya = yb * std::pow(xa / xb, slope);
        os << "<line x1='" << px(xa) << "' y1='" << py(ya) << "' x2='" << px(xb) << "' y2='"
           << py(yb) << "' stroke='#999' stroke-dasharray='2,4'/>\n";
        os << "<text x='" << px(xb) - 4 << "' y='" << py(yb) - 4
           << "' text-anchor='end' font-size='10' fill='#666'>slope " << slope << "</text>\n";
    }
    int legend_y = MT + 14;
    for (const auto& s : series) {
        os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5'";
        if (s.dashed) os << " stroke-dasharray='6,3'";
        os << " points='";
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (s.x[i] <= 0.0 || s.y[i] <= 0.0) continue;
            os << px(s.x[i]) << "," << py(s.y[i]) << " ";
        }
        os << "'/>\n";
        os << "<text x='" << W - MR - 6 << "' y='" << legend_y << "' text-anchor='end' fill='"
           << s.color << "' font-size='11'>" << s.label << "</text>\n";
        legend_y += 14;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace fraclap
