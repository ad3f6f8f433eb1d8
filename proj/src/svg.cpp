#include "korn/svg.hpp"

#include <cstdio>
#include <fstream>

#include "korn/io.hpp"

namespace korn {

namespace {

const char* GEN_GRAYS[] = {"#cccccc", "#bbbbbb", "#aaaaaa", "#999999", "#888888",
                           "#777777", "#666666", "#555555", "#444444"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void write_svg(const std::string& path, const SvgLayers& layers, double mu, int pixels) {
  std::ofstream f(path);
  if (!f) throw io_error("cannot open for writing: " + path);
  double scale = pixels / (2.0 * mu);
  auto X = [&](double x) { return fmt((x + mu) * scale); };
  auto Y = [&](double y) { return fmt((mu - y) * scale); };  // flip y for screen coords

  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << pixels << "\" height=\"" << pixels
    << "\" viewBox=\"0 0 " << pixels << " " << pixels << "\">\n";
  f << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternTransform=\"rotate(45)\" "
       "patternUnits=\"userSpaceOnUse\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#336633\" "
       "stroke-width=\"1.5\"/></pattern></defs>\n";
  f << "<rect id=\"bg\" width=\"" << pixels << "\" height=\"" << pixels << "\" fill=\"white\"/>\n";

  if (layers.covering) {
    f << "<g id=\"layer-covering\" fill=\"none\">\n";
    for (size_t i = 0; i < layers.covering->squares.size(); ++i) {
      const Square& q = layers.covering->squares[i];
      Box b = q.box();
      int gidx = std::min(std::max(q.gen, 0), 8);
      f << "<rect id=\"cov-" << i << "\" x=\"" << X(b.x0) << "\" y=\"" << Y(b.y1) << "\" width=\""
        << fmt(b.width() * scale) << "\" height=\"" << fmt(b.height() * scale) << "\" stroke=\""
        << GEN_GRAYS[gidx] << "\" stroke-width=\"0.6\"/>\n";
    }
    f << "</g>\n";
    // hatched Z components
    f << "<g id=\"layer-z\">\n";
    for (const auto& z : layers.covering->zcomps) {
      Box b = z.bbox;
      f << "<rect id=\"z-" << z.id << "\" x=\"" << X(b.x0) << "\" y=\"" << Y(b.y1) << "\" width=\""
        << fmt(b.width() * scale) << "\" height=\"" << fmt(b.height() * scale)
        << "\" fill=\"url(#hatch)\" fill-opacity=\"0.6\" stroke=\"none\"/>\n";
    }
    f << "</g>\n";
  }

  if (layers.exceptional) {
    const CellSet& e = *layers.exceptional;
    f << "<g id=\"layer-exceptional\" fill=\"#3355dd\" fill-opacity=\"0.35\" stroke=\"none\">\n";
    for (int iy = 0; iy < e.grid.n; ++iy)
      for (int ix = 0; ix < e.grid.n; ++ix)
        if (e.test(ix, iy)) {
          Box b = e.grid.cell_box(ix, iy);
          f << "<rect x=\"" << X(b.x0) << "\" y=\"" << Y(b.y1) << "\" width=\"" << fmt(b.width() * scale)
            << "\" height=\"" << fmt(b.height() * scale) << "\"/>\n";
        }
    f << "</g>\n";
  }

  if (layers.decomposition) {
    const PiecewiseDecomposition& d = *layers.decomposition;
    const GridSpec& g = d.grid;
    f << "<g id=\"layer-pieces\" stroke=\"black\" stroke-width=\"1.2\">\n";
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        int lab = d.labels[g.idx(ix, iy)];
        Box b = g.cell_box(ix, iy);
        if (ix + 1 < g.n && d.labels[g.idx(ix + 1, iy)] != lab)
          f << "<line x1=\"" << X(b.x1) << "\" y1=\"" << Y(b.y0) << "\" x2=\"" << X(b.x1) << "\" y2=\""
            << Y(b.y1) << "\"/>\n";
        if (iy + 1 < g.n && d.labels[g.idx(ix, iy + 1)] != lab)
          f << "<line x1=\"" << X(b.x0) << "\" y1=\"" << Y(b.y1) << "\" x2=\"" << X(b.x1) << "\" y2=\""
            << Y(b.y1) << "\"/>\n";
      }
    f << "</g>\n";
  }

  if (layers.field) {
    f << "<g id=\"layer-jumps\" stroke=\"#cc2222\" stroke-width=\"1.6\">\n";
    for (size_t i = 0; i < layers.field->jumps.segments.size(); ++i) {
      const Segment& s = layers.field->jumps.segments[i];
      f << "<line id=\"jump-" << i << "\" x1=\"" << X(s.a.x) << "\" y1=\"" << Y(s.a.y) << "\" x2=\"" << X(s.b.x)
        << "\" y2=\"" << Y(s.b.y) << "\"/>\n";
    }
    f << "</g>\n";
  }

  f << "</svg>\n";
}

}  // namespace korn
