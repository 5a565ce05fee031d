use lstgrid::io::{self, SampleType};
use lstgrid::{ClassifiedGrid, RasterGrid, DEFAULT_NODATA};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = RasterGrid> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop_oneof![1 => Just(None), 6 => any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Some)], w * h)
            .prop_map(move |vals| {
                let samples = vals
                    .into_iter()
                    .map(|v| match v {
                        Some(x) if x != DEFAULT_NODATA => x,
                        _ => DEFAULT_NODATA,
                    })
                    .collect();
                RasterGrid::new(w, h, samples, DEFAULT_NODATA).unwrap()
            })
    })
}

fn same_bits(a: &RasterGrid, b: &RasterGrid) -> bool {
    a.width() == b.width()
        && a.height() == b.height()
        && a.nodata().to_bits() == b.nodata().to_bits()
        && a.samples().iter().zip(b.samples()).all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ascii_grid_round_trip(g in grid_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.asc");
        io::write_ascii_grid(&g, &p).unwrap();
        prop_assert!(same_bits(&g, &io::read_ascii_grid(&p).unwrap()));
        prop_assert!(same_bits(&g, &io::read_raster(&p).unwrap()));
    }

    #[test]
    fn float_tiff_round_trip(g in grid_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.tif");
        io::write_tiff(&g, SampleType::F64, &p).unwrap();
        prop_assert!(same_bits(&g, &io::read_raster(&p).unwrap()));
    }

    #[test]
    fn lst_text_keeps_two_decimals(vals in prop::collection::vec(prop_oneof![Just(None), (-40.0f64..80.0).prop_map(Some)], 1..60)) {
        let n = vals.len();
        let g = RasterGrid::new(n, 1, vals.iter().map(|v| v.unwrap_or(DEFAULT_NODATA)).collect(), DEFAULT_NODATA).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lst.txt");
        io::write_lst_text(&g, &p).unwrap();
        let back = io::read_lst_text(&p).unwrap();
        for (a, b) in g.samples().iter().zip(back.samples()) {
            if *a == DEFAULT_NODATA {
                prop_assert!(back.is_nodata(*b));
            } else {
                prop_assert!((a - b).abs() <= 0.005 + 1e-9);
            }
        }
    }
}

#[test]
fn classified_tiff_keeps_labels_and_legend() {
    let legend: Vec<String> = ["water", "urban area", "forest"].iter().map(|s| s.to_string()).collect();
    let labels = (0..35u16).map(|i| i % 4).collect();
    let g = ClassifiedGrid::new(7, 5, labels, legend).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("classified.tif");
    io::write_classified_tiff(&g, &p).unwrap();
    assert_eq!(io::read_classified_tiff(&p).unwrap(), g);
}

#[test]
fn missing_file_names_the_path() {
    let err = io::read_raster("/nonexistent/band3.asc").unwrap_err();
    assert!(err.to_string().contains("band3.asc"));
}
