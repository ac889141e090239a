from cli.base import PipelineCommand, as_json
from cli.forms import FilterForm
from dataset.index import DatasetIndex
from dataset.surgery import filter_fully_visible, filter_min_area


class Command(PipelineCommand):
    help = "Drop objects below a box area or not fully visible; images left empty are dropped."
    form_class = FilterForm

    def add_options(self, parser):
        parser.add_argument('dataset', nargs='?')
        parser.add_argument('--out', '-o')
        parser.add_argument('--min-area', type=int, dest='min_area', help="minimum box area in pixels")
        parser.add_argument('--fully-visible', action='store_true', dest='fully_visible', default=None)

    def run(self, cleaned):
        index = DatasetIndex.load(cleaned['dataset'])
        if cleaned.get('min_area') is not None:
            result = filter_min_area(index, cleaned['min_area'])
        else:
            result = filter_fully_visible(index)
        result.save(cleaned['out'])
        return as_json({'before': index.to_dict(), 'after': result.to_dict()})
