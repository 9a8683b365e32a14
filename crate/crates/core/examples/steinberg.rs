//! Pack rectangles into a box that satisfies the area condition.
use demand_strip::geom::{verify_placement, Rect};
use demand_strip::square::{steinberg_condition, steinberg_pack};

fn main() -> demand_strip::Result<()> {
    let rects = vec![Rect::new(0, 6, 3), Rect::new(1, 3, 5), Rect::new(2, 4, 2), Rect::new(3, 2, 2), Rect::new(4, 5, 1)];
    let (w, h) = (12, 10);
    steinberg_condition(&rects, w, h)?;
    let p = steinberg_pack(&rects, w, h)?;
    verify_placement(&rects, &p).expect("no overlaps");
    for r in &rects {
        println!("{}x{} at {:?}", r.w, r.h, p.positions[&r.id]);
    }
    match steinberg_condition(&[Rect::new(0, 13, 1)], w, h) {
        Err(e) => println!("rejected: {e}"),
        Ok(()) => println!("accepted"),
    }
    Ok(())
}
