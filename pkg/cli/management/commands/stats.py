from cli.base import PipelineCommand, as_json
from cli.forms import StatsForm
from dataset.index import DatasetIndex
from dataset.stats import compute_stats


class Command(PipelineCommand):
    help = "Print class, instance, area and occlusion statistics of a dataset as JSON."
    form_class = StatsForm

    def add_options(self, parser):
        parser.add_argument('dataset', nargs='?')

    def run(self, cleaned):
        return as_json(compute_stats(DatasetIndex.load(cleaned['dataset'])).to_dict())
