//! Run verification campaigns on a small corpus and write the CSV report and a histogram.

use factor_alloc::genlab::{free_corpus, parse_manifest};
use factor_alloc::harness::{histogram_svg, run_campaign, Campaign, CampaignOptions, Pipeline};

fn main() -> factor_alloc::Result<()> {
    let corpus = free_corpus(3, 100, 16.0, 64);
    for pipeline in [Pipeline::Identity, Pipeline::Extract, Pipeline::Balance] {
        let opts = CampaignOptions { shifts: 3, pipeline, ..CampaignOptions::default() };
        let report = run_campaign(Campaign::Equivariance, &corpus, &opts)?;
        print!("{pipeline:?}: {}", report.summary());
    }

    let lattices = parse_manifest("manifest v1\n41 lattice 2 4 64 gens=16,0;0,16\n42 lattice 2 4 64 gens=8,0;0,8\n")?;
    let report = run_campaign(Campaign::Symmetry, &lattices, &CampaignOptions::default())?;
    print!("{}", report.deterministic_csv());

    let dir = std::env::temp_dir();
    let svg = histogram_svg("shell index", &report.check("sym.shell").map(|r| r.value).collect::<Vec<_>>(), 8);
    factor_alloc::io::write_atomic(&dir.join("factorlab-shell.svg"), &svg)?;
    println!("histogram written to {}", dir.join("factorlab-shell.svg").display());
    Ok(())
}
