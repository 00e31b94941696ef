//! Name and prose generators for the simulated wikis.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "ve", "su", "dan", "tor", "bel", "ish", "an", "po", "ree", "ga", "mun", "sel", "yar", "ob",
    "lin", "te", "quo", "nar", "vel", "hu", "zen", "mar", "col", "pe", "tas", "win",
];

const ZH_CHARS: &[&str] = &[
    "长", "青", "白", "黑", "清", "乌", "金", "沙", "龙", "云", "石", "松", "安", "平", "湘", "渭", "洛", "汾", "嘉",
    "岷", "赣", "闽", "珠", "桂", "滇", "黔", "辽", "吉", "淮", "泾",
];

const ADJECTIVES: &[&str] = &[
    "dense",
    "shallow",
    "braided",
    "fertile",
    "rocky",
    "marshy",
    "arid",
    "forested",
    "terraced",
    "narrow",
    "broad",
    "seasonal",
    "glacial",
    "volcanic",
    "sandy",
    "humid",
    "temperate",
    "remote",
    "densely populated",
    "protected",
];

const NOUNS: &[&str] = &[
    "wetlands",
    "grasslands",
    "fisheries",
    "orchards",
    "vineyards",
    "rice paddies",
    "oak woodland",
    "reed beds",
    "salmon runs",
    "migratory birds",
    "freshwater mussels",
    "otters",
    "herons",
    "mangroves",
    "pine forest",
    "limestone gorges",
    "waterfalls",
    "floodplains",
    "oxbow lakes",
    "sandbanks",
];

const TERRAIN: &[&str] = &[
    "plateau",
    "foothills",
    "coastal plain",
    "highlands",
    "escarpment",
    "delta",
    "valley floor",
    "uplands",
    "lowlands",
    "basin",
    "moorland",
    "savanna",
];

const USES: &[&str] = &[
    "irrigation",
    "drinking water",
    "hydroelectric power",
    "navigation",
    "fishing",
    "recreation",
    "timber rafting",
    "industrial cooling",
    "tourism",
    "flood control",
];

const EVENTS: &[&str] = &["major flood", "severe drought", "landslide", "dam failure", "chemical spill", "cold snap"];

const VERBS: &[&str] = &["struck", "affected", "devastated", "reshaped", "disrupted", "flooded"];

const ZH_NOUNS: &[&str] = &["渔业", "湿地", "森林", "矿产", "水力", "农田", "草原", "鸟类", "水稻", "茶园"];

const ZH_USES: &[&str] = &["灌溉", "航运", "发电", "饮用水", "渔业", "旅游", "防洪"];

fn pick<'a>(rng: &mut ChaCha8Rng, list: &[&'a str]) -> &'a str {
    list.choose(rng).copied().unwrap_or_default()
}

pub fn name(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    let mut s: String = (0..n).map(|_| pick(rng, SYLLABLES)).collect();
    if let Some(first) = s.get(..1) {
        s = first.to_uppercase() + &s[1..];
    }
    s
}

pub fn zh_name(rng: &mut ChaCha8Rng) -> String {
    (0..2).map(|_| pick(rng, ZH_CHARS)).collect()
}

/// Lengths are written the way encyclopedia prose usually does.
pub fn km_text(km: f64) -> String {
    if km >= 100.0 {
        let n = km.round() as u64;
        if n >= 1000 {
            format!("{},{:03}", n / 1000, n % 1000)
        } else {
            n.to_string()
        }
    } else {
        format!("{km:.1}")
    }
}

pub fn filler_sentence(rng: &mut ChaCha8Rng, subject: &str, other: &str) -> String {
    match rng.random_range(0..7) {
        0 => format!(
            "The {subject} basin supports {} {} and {}.",
            pick(rng, ADJECTIVES),
            pick(rng, NOUNS),
            pick(rng, NOUNS)
        ),
        1 => format!(
            "Its upper course crosses the {} {} before reaching the {}.",
            pick(rng, ADJECTIVES),
            pick(rng, TERRAIN),
            pick(rng, TERRAIN)
        ),
        2 => format!("Local communities rely on the river for {} and {}.", pick(rng, USES), pick(rng, USES)),
        3 => format!(
            "In {}, a {} {} the lower valley.",
            rng.random_range(1850..2024),
            pick(rng, EVENTS),
            pick(rng, VERBS)
        ),
        4 => format!("The average discharge is about {} cubic metres per second.", rng.random_range(2..4000)),
        5 => format!("Several tributaries, including the {other}, join it in the {}.", pick(rng, TERRAIN)),
        _ => format!(
            "The surrounding {} is known for its {} and {}.",
            pick(rng, TERRAIN),
            pick(rng, NOUNS),
            pick(rng, NOUNS)
        ),
    }
}

pub fn zh_filler_sentence(rng: &mut ChaCha8Rng, subject: &str) -> String {
    match rng.random_range(0..4) {
        0 => format!("{subject}流域内有丰富的{}资源。", pick(rng, ZH_NOUNS)),
        1 => format!("当地居民利用河水进行{}和{}。", pick(rng, ZH_USES), pick(rng, ZH_USES)),
        2 => format!("{}年，{subject}发生了一次大洪水。", rng.random_range(1850..2024)),
        _ => format!("河流两岸分布着大片{}。", pick(rng, ZH_NOUNS)),
    }
}

/// A paragraph of `n` filler sentences.
pub fn paragraph(rng: &mut ChaCha8Rng, n: usize, subject: &str, other: &str) -> String {
    (0..n).map(|_| filler_sentence(rng, subject, other)).collect::<Vec<_>>().join(" ")
}
