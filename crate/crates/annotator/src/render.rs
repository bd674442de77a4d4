//! Deterministic PNG screenshots for screens that ship no image assets.

use guiagent_core::actions::Platform;
use guiagent_core::sim_env::{render_key, ScreenGraph, SimState};
use sha2::{Digest, Sha256};

/// Pixel size of rendered screenshots.
pub fn canvas_size(platform: Platform) -> (u32, u32) {
    match platform {
        Platform::Web => (1280, 720),
        Platform::Mobile => (540, 1170),
    }
}

fn tint(seed: &str, lo: u8) -> [u8; 3] {
    let h = Sha256::digest(seed.as_bytes());
    let span = 255 - lo;
    [lo + h[0] % span, lo + h[1] % span, lo + h[2] % span]
}

struct Canvas {
    w: u32,
    h: u32,
    px: Vec<u8>,
}

impl Canvas {
    fn new(w: u32, h: u32, bg: [u8; 3]) -> Self {
        let px = bg.iter().copied().cycle().take((w * h * 3) as usize).collect();
        Canvas { w, h, px }
    }

    /// Fills the normalized box `[x0, y0, x1, y1]`.
    fn fill(&mut self, bbox: [f64; 4], rgb: [u8; 3]) {
        let sx = |v: f64| ((v.clamp(0.0, 1.0) * self.w as f64).round() as u32).min(self.w);
        let sy = |v: f64| ((v.clamp(0.0, 1.0) * self.h as f64).round() as u32).min(self.h);
        let (x0, x1, y0, y1) = (sx(bbox[0]), sx(bbox[2]), sy(bbox[1]), sy(bbox[3]));
        for y in y0..y1 {
            for x in x0..x1 {
                let i = ((y * self.w + x) * 3) as usize;
                self.px[i..i + 3].copy_from_slice(&rgb);
            }
        }
    }

    fn outline(&mut self, bbox: [f64; 4], rgb: [u8; 3]) {
        let tx = 1.0 / self.w as f64;
        let ty = 1.0 / self.h as f64;
        let [x0, y0, x1, y1] = bbox;
        self.fill([x0, y0, x1, y0 + ty], rgb);
        self.fill([x0, y1 - ty, x1, y1], rgb);
        self.fill([x0, y0, x0 + tx, y1], rgb);
        self.fill([x1 - tx, y0, x1, y1], rgb);
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.w, self.h);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("png header");
        writer.write_image_data(&self.px).expect("png data");
        writer.finish().expect("png finish");
        out
    }
}

/// Renders the current screen: a header band keyed by the screenshot key,
/// then every visible element as a tinted box. Text fields are white.
pub fn render_png(graph: &ScreenGraph, state: &SimState) -> Vec<u8> {
    let (w, h) = canvas_size(graph.platform);
    let screen = state.screen(graph);
    let scroll = state.tab().scroll;
    let mut c = Canvas::new(w, h, tint(&screen.id, 200));
    c.fill([0.0, 0.0, 1.0, 0.02], tint(&render_key(graph, state), 40));
    for e in screen.elements.iter().filter(|e| e.min_scroll <= scroll) {
        let fill = if e.text_field.is_some() {
            [255, 255, 255]
        } else {
            tint(&e.id, 120)
        };
        c.fill(e.bbox, fill);
        c.outline(e.bbox, [40, 40, 40]);
    }
    c.encode()
}
